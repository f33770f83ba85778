#pragma once

#include "w2eps/constants.hpp"
#include "w2eps/csv.hpp"
#include "w2eps/cz.hpp"
#include "w2eps/envelope.hpp"
#include "w2eps/error.hpp"
#include "w2eps/experiments.hpp"
#include "w2eps/fit.hpp"
#include "w2eps/generators.hpp"
#include "w2eps/grid.hpp"
#include "w2eps/grid_io.hpp"
#include "w2eps/lower_envelope.hpp"
#include "w2eps/parallel.hpp"
#include "w2eps/pucci.hpp"
#include "w2eps/rng.hpp"
#include "w2eps/run_config.hpp"

namespace w2eps {

inline constexpr const char* version = "0.1.0";

}  // namespace w2eps
