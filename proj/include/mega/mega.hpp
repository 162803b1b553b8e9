// Umbrella header for the MEGA library.
#pragma once

#include "mega/core.hpp"
#include "mega/datagen.hpp"
#include "mega/dataset.hpp"
#include "mega/estimators.hpp"
#include "mega/experiments.hpp"
#include "mega/gmm.hpp"
#include "mega/io.hpp"
#include "mega/manifest.hpp"
#include "mega/moments.hpp"
#include "mega/norms.hpp"
#include "mega/ppca.hpp"
#include "mega/rng.hpp"
#include "mega/selection.hpp"
#include "mega/svg.hpp"
#include "mega/sym_matrix.hpp"
