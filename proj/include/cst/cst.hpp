#pragma once

#include "cst/basis.hpp"
#include "cst/core.hpp"
#include "cst/forward.hpp"
#include "cst/geometry.hpp"
#include "cst/io.hpp"
#include "cst/metrics.hpp"
#include "cst/montecarlo.hpp"
#include "cst/phantom.hpp"
#include "cst/pipeline.hpp"
#include "cst/solvers.hpp"
#include "cst/uncertainty.hpp"
