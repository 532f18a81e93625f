#pragma once

#include "tsc/bench.hpp"
#include "tsc/dgp.hpp"
#include "tsc/error.hpp"
#include "tsc/estimators.hpp"
#include "tsc/io.hpp"
#include "tsc/panel.hpp"
#include "tsc/panel_csv.hpp"
#include "tsc/random.hpp"
#include "tsc/regressor.hpp"
#include "tsc/simplex.hpp"
#include "tsc/svg.hpp"
#include "tsc/targeting.hpp"
#include "tsc/weights_solver.hpp"

namespace tsc {
inline constexpr const char* kVersion = "0.1.0";
}
