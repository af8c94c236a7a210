#pragma once

// Umbrella header: stochastic diagonal estimation toolkit.
//
//   probes.hpp        deterministic Rademacher/Gaussian probe substreams
//   operators.hpp     counted matvec oracle and concrete operators
//   matrix_market.hpp Matrix Market reader/writer
//   power_law.hpp     synthetic power-law PSD generator
//   estimators.hpp    streaming diagonal estimator + reference variances
//   bounds.hpp        sufficient-query-count calculators and diagnostics
//   diagpp.hpp        projection + residual-estimation algorithm
//   experiment.hpp    convergence-study harness and CSV output

#include "diagest/bounds.hpp"
#include "diagest/diagpp.hpp"
#include "diagest/estimators.hpp"
#include "diagest/experiment.hpp"
#include "diagest/format.hpp"
#include "diagest/matrix_market.hpp"
#include "diagest/operators.hpp"
#include "diagest/power_law.hpp"
#include "diagest/probes.hpp"
