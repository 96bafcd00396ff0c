#pragma once

#include "hsel/types.hpp"

namespace hsel {

enum class GlmKind { logit, probit };

/// Binary-response loss in the canonical -y*phi1(u) + phi2(u) form. phi2 is
/// convex for both links, so the penalized negative log-likelihood is convex.
struct GlmFamily {
  GlmKind kind = GlmKind::logit;

  double phi1(double u) const;
  double phi2(double u) const;
  double phi1_prime(double u) const;
  double phi2_prime(double u) const;

  // d/du of the per-observation negative log-likelihood -y*phi1(u)+phi2(u).
  double nll_du(double u, double y) const;
  // Second derivative; strictly positive for both links.
  double nll_du2(double u, double y) const;

  static GlmFamily logit() { return {GlmKind::logit}; }
  static GlmFamily probit() { return {GlmKind::probit}; }
};

struct GlmFit {
  Vector theta;
  double lambda1 = 0.0;
  double nll = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = true;
};

struct GlmOptions {
  double kkt_tol = 1e-6;
  double rel_obj_tol = 1e-10;
  int max_iter = 10000;
  bool accelerate = true;
  // Refit an unpenalized MLE on the selected support after the l1 solve.
  bool post_lasso_refit = false;
};

// Mean negative log-likelihood and its gradient with respect to theta.
std::pair<double, Vector> nll_and_gradient(const Vector& theta, const Matrix& w,
                                           const Vector& y1, const GlmFamily& family);

// l1-penalized GLM via monotone accelerated proximal gradient with
// backtracking. KKT residual is reported as the certificate.
GlmFit fit_l1_glm(const Matrix& w, const Vector& y1, double lambda1,
                  const GlmFamily& family, const GlmOptions& opts = {});

// Unpenalized MLE by Newton-Raphson with step halving.
GlmFit fit_glm_mle(const Matrix& w, const Vector& y1, const GlmFamily& family,
                   double grad_tol = 1e-10, int max_iter = 200);

// scale * sqrt(log(d) / n); default scale 0.5.
double default_lambda1(Index n, Index d, double scale = 0.5);

// max_j |grad_j nll(0)|; lambda at or above this yields theta = 0.
double null_threshold_lambda1(const Matrix& w, const Vector& y1, const GlmFamily& family);

double l1_glm_kkt_residual(const Vector& theta, const Matrix& w, const Vector& y1,
                           double lambda1, const GlmFamily& family);

}  // namespace hsel
