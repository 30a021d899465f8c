#pragma once

#include "redlab/analytics.hpp"
#include "redlab/assignment.hpp"
#include "redlab/distributions.hpp"
#include "redlab/experiments.hpp"
#include "redlab/io.hpp"
#include "redlab/lp.hpp"
#include "redlab/quadrature.hpp"
#include "redlab/rng.hpp"
#include "redlab/simulator.hpp"
#include "redlab/workload.hpp"
