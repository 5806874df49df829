#pragma once

// Differentially private linear and logistic regression by Laplace
// perturbation of the polynomial coefficients of the regression objective,
// with spectral repair of the noisy quadratic and a cross-validation
// benchmark harness.

#include "fm/cli.hpp"
#include "fm/dataset.hpp"
#include "fm/error.hpp"
#include "fm/eval.hpp"
#include "fm/linalg.hpp"
#include "fm/mechanism.hpp"
#include "fm/objective.hpp"
#include "fm/random.hpp"
#include "fm/solver.hpp"
#include "fm/train.hpp"
