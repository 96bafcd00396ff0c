#pragma once

#include "hsel/types.hpp"

namespace hsel {

/// Solution of the pivotal program min |D^{-1} beta|_1 + C*sigma over the
/// feasibility set A, with the attained slacks of both constraints.
struct DantzigSolution {
  Vector beta;
  double sigma = 0.0;
  double xi = 0.0;
  double C = 1.0;
  Vector d_diag;     // diagonal of D, entries 1 / v_{j*}
  double slack_inf = 0.0;  // sigma*xi - (1/n)|D v'(v0 - v beta)|_inf
  double slack_l2 = 0.0;   // sigma^2 - (1/n)|v0 - v beta|_2^2
  double objective = 0.0;
  bool solved = true;
};

// v_star[j] = max_i max(|2 x_ij|, |v_ij|) and its reciprocal (the D diagonal).
std::pair<Vector, Vector> scaling_matrix(const Matrix& x, const Matrix& v);

struct DantzigOptions {
  double C = 1.0;
  double sigma_floor = 1e-12;
  int iters_per_level = 1500;
  int smoothing_levels = 6;
};

// Pivotal Dantzig selector. sigma is eliminated analytically (the optimal
// sigma at fixed beta is the larger of the two constraint levels), leaving a
// convex nonsmooth problem in beta solved by smoothed accelerated proximal
// gradient with continuation. The returned pair is always feasible.
DantzigSolution solve_pivotal(const Vector& v0, const Matrix& v, double xi,
                              const DantzigOptions& opts = {});

// Overload taking a precomputed scaling (so x can differ from v).
DantzigSolution solve_pivotal(const Vector& v0, const Matrix& v, double xi,
                              const Vector& v_star, const DantzigOptions& opts);

// Sample moment-ratio factor for the self-normalized deviation bound:
// n^{d'/(4+2d')} min_j sqrt(mean(v_ij^2 e_i^2)) / mean(|v_ij e_i|^{2+d'})^{1/(2+d')}.
double b_n_delta(const Matrix& v, const Vector& eta_hat, double delta_prime);

// Significance level of the confidence sets for slope parameter a >= 1.
double alpha_level(double a, Index p, double b_n, double delta_prime, double a0 = 1.0);

// Tuning rule: a * max of the pure-noise branch c0*sqrt(log p / n) and the
// first-stage-error branch. Pass B_prime = 0 (or nonpositive inputs) to drop
// the second branch.
double default_xi(Index p, Index n_s, double Q_hat_beta, double beta_l1, double L,
                  double b_sigma_v, double B_prime, double v_star_min, double a = 1.0,
                  double c0 = 1.01);

struct XiIterationRecord {
  double xi = 0.0;
  double beta_l1 = 0.0;
  double objective = 0.0;
};

struct XiIterationConfig {
  double a = 1.0;
  double c0 = 1.01;
  double L = 1.0;
  double b_sigma_v = 0.0;
  double B_prime = 0.0;
  int max_rounds = 20;
  DantzigOptions solver;
};

struct XiIterationResult {
  DantzigSolution solution;
  std::vector<XiIterationRecord> history;
  bool converged = true;
  bool diverged = false;
};

// Plug-in iteration on xi: solve, update xi from the current estimate, repeat
// until the beta iterates stabilize.
XiIterationResult iterate_xi(const Vector& v0, const Matrix& v, double xi0,
                             const XiIterationConfig& cfg, double tol);

// Sampled-infimum probe of the l2-sensitivity over the cone
// {|Delta_{S^c}|_1 <= phi |Delta_S|_1}: min over sampled cone directions of
// (1/n)|D v'v Delta|_inf / max(|Delta|_1, |D^-1 Delta|_2), with D =
// diag(1/v_star). The D scaling matches the feasibility constraints of the
// pivotal program, so the value plugs directly into the interval bounds. An
// upper bound on the true kappa*.
double l2_sensitivity_bound(const Matrix& v, const Vector& v_star,
                            const IndexSet& support, double phi_cone, int n_dirs,
                            std::uint64_t seed);

struct PivotalCI {
  double kappa_star = 0.0;
  double halfwidth_l2 = 0.0;     // bound on |D^{-1}(beta_hat - beta*)|_2
  Vector halfwidth_coord;        // per-coordinate bounds on |beta_hat_j - beta*_j|
  double alpha = 0.0;
  bool bounded = true;           // false when the correction factor degenerates
};

// Non-asymptotic interval half-widths from the feasibility certificate; the
// first-stage terms drop out when B_prime = 0.
PivotalCI confidence_intervals(const DantzigSolution& sol, double kappa_star, Index k2,
                               double L, double b_sigma_v, double B_prime,
                               double alpha = 0.05);

}  // namespace hsel
