#pragma once

#include "hsel/types.hpp"

namespace hsel {

/// Piecewise-linear L-Lipschitz fit stored as (knot, value) pairs at the
/// distinct sorted index locations.
struct LipschitzFit {
  Vector knots;   // strictly increasing
  Vector values;  // fitted values at knots
  double L = 0.0;
  double sse = 0.0;
};

struct LipschitzOptions {
  // Additionally require fitted values non-decreasing along the index.
  bool monotone = false;
};

// Least squares over L-Lipschitz functions of u: the chain-constrained QP
// obtained after sorting by u and merging tied index values. Exact
// active-set solve.
LipschitzFit fit_lipschitz(const Vector& u, const Vector& z, double L,
                           const LipschitzOptions& opts = {});

// Linear interpolation between knots, constant beyond the range. Returns the
// stored value exactly when u0 hits a knot.
double predict(const LipschitzFit& fit, double u0);

Vector predict(const LipschitzFit& fit, const Vector& u);

// Doubling cross-validation for the Lipschitz cap: optimizes L on a training
// split subject to L <= cap, doubles the cap while it binds, and returns the
// candidate with the smallest held-out squared prediction error.
double cross_validate_L(const Vector& u, const Vector& z, double L0,
                        double split_fraction, int max_doublings, std::uint64_t seed);

/// Estimated single index plus the p+1 second-stage fits and their residuals.
struct ResidualBundle {
  Vector index;                    // u_i = w_i . theta on selected rows
  std::vector<LipschitzFit> fits;  // [0] for y2, [1..p] for x columns
  Vector v0;                       // y2 - fitted E(y2 | index)
  Matrix v;                        // x   - fitted E(x  | index), columnwise
};

// Runs the p+1 Lipschitz regressions of (y2, x columns) on the index w.theta
// and assembles the residuals used by the third stage.
ResidualBundle residualize(const SelectionDataset& dataset, const Vector& theta, double L,
                           const LipschitzOptions& opts = {});

}  // namespace hsel
