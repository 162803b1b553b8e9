// Run provenance: every CLI output directory gets exactly one manifest
// describing the command, parameters, seed, and artifacts that produced it.
#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mega/core.hpp"
#include "mega/io.hpp"

namespace mega {

inline constexpr const char* kToolVersion = "0.1.0";

struct RunManifest {
  std::string command;
  std::map<std::string, std::string> parameters;
  std::uint64_t seed = 0;
  std::vector<std::string> artifacts;
  std::string tool_version = kToolVersion;
  std::string timestamp;  // ISO-8601 UTC, filled by write_manifest when empty
};

inline std::string iso8601_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_manifest(RunManifest manifest, const std::string& path) {
  if (manifest.timestamp.empty()) manifest.timestamp = iso8601_now();
  nlohmann::json j;
  j["command"] = manifest.command;
  j["parameters"] = manifest.parameters;
  j["seed"] = manifest.seed;
  j["artifacts"] = manifest.artifacts;
  j["tool_version"] = manifest.tool_version;
  j["timestamp"] = manifest.timestamp;
  auto out = detail::open_for_write(path);
  out << j.dump(2) << '\n';
  detail::finish_write(out, path);
}

}  // namespace mega
