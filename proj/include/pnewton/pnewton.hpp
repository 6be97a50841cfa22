#pragma once

#include "pnewton/core.hpp"
#include "pnewton/trace_io.hpp"
#include "pnewton/operators.hpp"
#include "pnewton/subproblem.hpp"
#include "pnewton/solvers.hpp"
#include "pnewton/problems.hpp"
#include "pnewton/analysis.hpp"
#include "pnewton/experiment.hpp"
