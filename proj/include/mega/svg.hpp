// Minimal standalone SVG scatter plots for eyeballing data against
// generated samples. Output is deterministic for identical inputs.
#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "mega/core.hpp"
#include "mega/dataset.hpp"
#include "mega/io.hpp"

namespace mega {

struct ScatterGroup {
  const Dataset* points = nullptr;
  std::string color;
  std::string label;
};

inline void write_scatter_svg(const std::vector<ScatterGroup>& groups,
                              const std::string& path) {
  if (groups.empty()) throw InvalidInputError("write_scatter_svg: no groups");
  for (const auto& g : groups) {
    if (g.points == nullptr || g.points->dim() != 2) {
      throw InvalidInputError("write_scatter_svg: every group needs 2-D points");
    }
  }
  double lo_x = groups[0].points->rows().col(0).minCoeff();
  double hi_x = groups[0].points->rows().col(0).maxCoeff();
  double lo_y = groups[0].points->rows().col(1).minCoeff();
  double hi_y = groups[0].points->rows().col(1).maxCoeff();
  for (const auto& g : groups) {
    lo_x = std::min(lo_x, g.points->rows().col(0).minCoeff());
    hi_x = std::max(hi_x, g.points->rows().col(0).maxCoeff());
    lo_y = std::min(lo_y, g.points->rows().col(1).minCoeff());
    hi_y = std::max(hi_y, g.points->rows().col(1).maxCoeff());
  }
  const double pad_x = std::max(1e-9, 0.05 * (hi_x - lo_x));
  const double pad_y = std::max(1e-9, 0.05 * (hi_y - lo_y));
  lo_x -= pad_x; hi_x += pad_x;
  lo_y -= pad_y; hi_y += pad_y;

  const double width = 640.0, height = 480.0, margin = 40.0;
  auto sx = [&](double x) {
    return margin + (x - lo_x) / (hi_x - lo_x) * (width - 2 * margin);
  };
  auto sy = [&](double y) {
    return height - margin - (y - lo_y) / (hi_y - lo_y) * (height - 2 * margin);
  };
  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return std::string(buf);
  };

  auto out = detail::open_for_write(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
      << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height
      << "\">\n";
  out << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height
      << "\" fill=\"white\"/>\n";
  out << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\""
      << width - 2 * margin << "\" height=\"" << height - 2 * margin
      << "\" fill=\"none\" stroke=\"#333\"/>\n";
  double legend_y = margin + 14.0;
  for (const auto& g : groups) {
    for (Eigen::Index i = 0; i < g.points->n(); ++i) {
      out << "<circle cx=\"" << fmt(sx(g.points->rows()(i, 0))) << "\" cy=\""
          << fmt(sy(g.points->rows()(i, 1))) << "\" r=\"2\" fill=\"" << g.color
          << "\" fill-opacity=\"0.6\"/>\n";
    }
    if (!g.label.empty()) {
      out << "<text x=\"" << margin + 8 << "\" y=\"" << fmt(legend_y)
          << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << g.color
          << "\">" << g.label << "</text>\n";
      legend_y += 16.0;
    }
  }
  out << "</svg>\n";
  detail::finish_write(out, path);
}

}  // namespace mega
