#pragma once

#include "hsel/types.hpp"

namespace hsel {

struct LassoConfig {
  double lambda3 = 0.0;
  bool weighted = false;  // penalty weights sigma_hat_{v_j} as in the weighted program
  double tol = 1e-8;      // KKT residual tolerance
  int max_iter = 100000;  // coordinate sweeps
};

// l1-penalized least squares (1/2n)|v0 - v beta|^2 + lambda sum_j w_j |beta_j|
// by cyclic coordinate descent with covariance updates and an active-set pass.
SparseFit lasso(const Vector& v0, const Matrix& v, const LassoConfig& cfg);

double lasso_kkt_residual(const Vector& beta, const Vector& v0, const Matrix& v,
                          double lambda, const Vector& weights);

// scale * k2 * sqrt(k1 log(d) / n_s); default scale 0.2.
double default_lambda3(Index k1, Index k2, Index d, Index n_s, double scale = 0.2);

struct IterateLambdaResult {
  SparseFit fit;
  double sigma_eta = 1.0;
  double lambda3 = 0.0;
  int iterations = 0;
  bool converged = true;
};

// Data-driven lambda: alternate the Lasso fit with the residual-SD update
// lambda(t) = c * sigma_v * sigma_eta^t * sqrt(log p / n_s) until the
// sigma_eta sequence stabilizes.
IterateLambdaResult iterate_lambda3(const Vector& v0, const Matrix& v, double c = 2.001,
                                    double tol = 1e-4);

struct PostLassoFit {
  Vector beta_tilde;  // zeros off support
  IndexSet support;
  Vector se;  // bootstrap SEs, one per support element (ascending order)
  int n_boot = 0;
};

// OLS refit on a fixed support with pairs-bootstrap standard errors.
PostLassoFit post_lasso(const Vector& v0, const Matrix& v, const IndexSet& support,
                        int n_boot = 200, std::uint64_t seed = 0);

// Sample mutual-incoherence statistic || Sigma_{K^c K} Sigma_{KK}^{-1} ||_inf.
double incoherence_stat(const Matrix& v, const IndexSet& support);

// Monte Carlo probe of the restricted eigenvalue: min over sampled unit
// directions in the cone {|D_{S^c}|_1 <= 3 |D_S|_1} of (1/n)|v D|_2^2. An
// upper bound on the true restricted minimum; diagnostic only.
double restricted_eig_probe(const Matrix& v, const IndexSet& support, int n_dirs,
                            std::uint64_t seed);

}  // namespace hsel
