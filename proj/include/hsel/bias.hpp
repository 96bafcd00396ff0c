#pragma once

#include "hsel/lipschitz.hpp"
#include "hsel/normal.hpp"
#include "hsel/types.hpp"

namespace hsel {

/// Estimate of the selection-bias function evaluated on the selected sample.
struct BiasEstimate {
  enum class Kind { closed_form, nls };
  Kind kind = Kind::closed_form;
  Vector g_at_sample;  // length n_s
  LipschitzFit fit;    // populated for the nls variant only
};

// Closed-form estimator: fitted E(y2 | index) minus the fitted conditional
// means of x weighted by beta, evaluated at the sample index values.
BiasEstimate g_hat_closed_form(const ResidualBundle& bundle,
                               const SelectionDataset& dataset, const Vector& beta);

// Nonparametric least-squares estimator: Lipschitz regression of the partial
// residual y2 - x.beta on the index w.theta over the selected sample.
BiasEstimate g_tilde_nls(const SelectionDataset& dataset, const Vector& theta,
                         const Vector& beta, double L);

struct HeckmanFit {
  Vector theta_probit;  // length d
  Vector beta;          // length p
  double mills_coef = 0.0;
  Vector se;  // bootstrap SEs for (beta, mills_coef) when requested; else empty
  bool converged = false;
};

// Classical two-step estimator: probit maximum likelihood of y1 on w, then
// least squares of y2 on x plus the inverse Mills ratio of the fitted index
// over the selected rows. include_mills = false drops the correction column,
// reducing the second step to plain least squares.
HeckmanFit heckman_two_step(const SelectionDataset& dataset, int n_boot = 0,
                            std::uint64_t seed = 0, bool include_mills = true);

// One-step Lasso of y2 on x over the selected sample with both demeaned;
// ignores the selection mechanism entirely.
SparseFit direct_lasso_baseline(const SelectionDataset& dataset, double lambda3);

// Least-squares coefficients via a rank-revealing QR; throws on rank
// deficiency.
Vector ols(const Matrix& x, const Vector& y);

}  // namespace hsel
