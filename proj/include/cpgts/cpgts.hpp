#pragma once

// Umbrella header.

#include "adaptive.hpp"
#include "classical_radau.hpp"
#include "cpg_solver.hpp"
#include "error_metrics.hpp"
#include "estimators.hpp"
#include "experiment.hpp"
#include "heat.hpp"
#include "ode_problem.hpp"
#include "problems.hpp"
#include "quadrature.hpp"
#include "time_mesh.hpp"
#include "types.hpp"
