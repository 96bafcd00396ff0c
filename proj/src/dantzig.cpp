#include "hsel/dantzig.hpp"

#include <cmath>

#include "hsel/normal.hpp"
#include "hsel/rng.hpp"

namespace hsel {

namespace {

double soft(double a, double t) {
  if (a > t) return a - t;
  if (a < -t) return a + t;
  return 0.0;
}

// Shared per-instance state for the sigma-eliminated objective
//   F(beta) = sum_j v_star_j |beta_j| + C * max(q(beta), s(beta)),
// q = |r|_2/sqrt(n), s = (1/n xi) max_j |r'v_j|/v_star_j, r = v0 - v beta.
struct Pivotal {
  const Vector& v0;
  const Matrix& v;
  const Vector& w;  // penalty weights v_star_j
  double C;
  double xi;
  double n;
  Matrix M;  // v'v, for the gradient of the sup-norm terms

  double q(const Vector& r) const { return r.norm() / std::sqrt(n); }

  double s(const Vector& y) const {
    // y = v'r
    return (y.cwiseAbs().cwiseQuotient(w)).maxCoeff() / (n * xi);
  }

  double objective(const Vector& beta, double* sigma_out = nullptr) const {
    const Vector r = v0 - v * beta;
    const double sig = std::max(q(r), s(v.transpose() * r));
    if (sigma_out) *sigma_out = sig;
    return (w.array() * beta.array().abs()).sum() + C * sig;
  }

  // Smoothed max via log-sum-exp over {q, +/- scaled correlations}; the value
  // and gradient of the smooth part C * mu * LSE(g_i / mu).
  double smooth_value_grad(const Vector& beta, double mu, Vector& grad) const {
    const Index p = v.cols();
    const Vector r = v0 - v * beta;
    const Vector y = v.transpose() * r;
    const double qv = q(r);

    // Terms g: g0 = q, g_{j,+/-} = +/- y_j / (w_j * n * xi).
    Vector g(2 * p + 1);
    g[0] = qv;
    for (Index j = 0; j < p; ++j) {
      const double t = y[j] / (w[j] * n * xi);
      g[1 + j] = t;
      g[1 + p + j] = -t;
    }
    const double gmax = g.maxCoeff();
    Vector e = ((g.array() - gmax) / mu).exp();
    const double z = e.sum();
    const double val = C * (gmax + mu * std::log(z));
    e /= z;  // softmax weights

    // grad = C * [ e0 * dq + sum_j (e_{j+} - e_{j-}) * dg_{j+} ]
    // dq = -v'r / (n q); dg_{j+} = -M col j / (w_j n xi).
    Vector zeta(p);
    for (Index j = 0; j < p; ++j) zeta[j] = (e[1 + j] - e[1 + p + j]) / (w[j] * n * xi);
    grad = -C * M * zeta;
    if (qv > 0.0) grad -= (C * e[0] / (n * qv)) * y;
    return val;
  }
};

}  // namespace

std::pair<Vector, Vector> scaling_matrix(const Matrix& x, const Matrix& v) {
  if (x.cols() != v.cols() || x.rows() != v.rows())
    throw std::invalid_argument("scaling_matrix: shape mismatch between x and v");
  const Index p = v.cols();
  Vector v_star(p), d_diag(p);
  for (Index j = 0; j < p; ++j) {
    v_star[j] = std::max((2.0 * x.col(j)).cwiseAbs().maxCoeff(),
                         v.col(j).cwiseAbs().maxCoeff());
    if (!(v_star[j] > 0.0))
      throw std::invalid_argument("scaling_matrix: column with zero scale");
    d_diag[j] = 1.0 / v_star[j];
  }
  return {v_star, d_diag};
}

DantzigSolution solve_pivotal(const Vector& v0, const Matrix& v, double xi,
                              const DantzigOptions& opts) {
  const Index p = v.cols();
  Vector v_star(p);
  for (Index j = 0; j < p; ++j) {
    v_star[j] = v.col(j).cwiseAbs().maxCoeff();
    if (!(v_star[j] > 0.0))
      throw std::invalid_argument("solve_pivotal: column with zero scale");
  }
  return solve_pivotal(v0, v, xi, v_star, opts);
}

DantzigSolution solve_pivotal(const Vector& v0, const Matrix& v, double xi,
                              const Vector& v_star, const DantzigOptions& opts) {
  if (v0.size() != v.rows() || v_star.size() != v.cols())
    throw std::invalid_argument("solve_pivotal: dimension mismatch");
  if (!(xi > 0.0)) throw std::invalid_argument("solve_pivotal: xi must be positive");
  if (!(opts.C > 0.0)) throw std::invalid_argument("solve_pivotal: C must be positive");
  if (v_star.minCoeff() <= 0.0)
    throw std::invalid_argument("solve_pivotal: scaling entries must be positive");
  const Index p = v.cols();
  const double n = static_cast<double>(v.rows());

  DantzigSolution sol;
  sol.xi = xi;
  sol.C = opts.C;
  sol.d_diag = v_star.cwiseInverse();

  Pivotal prob{v0, v, v_star, opts.C, xi, n, v.transpose() * v};

  // Scale of the problem: the objective at beta = 0. Zero only when v0 = 0.
  double sigma0 = 0.0;
  const double obj0 = prob.objective(Vector::Zero(p), &sigma0);
  if (!(obj0 > 0.0)) {
    sol.beta = Vector::Zero(p);
    sol.sigma = opts.sigma_floor;
    sol.slack_inf = sol.sigma * xi;
    sol.slack_l2 = sol.sigma * sol.sigma;
    sol.objective = opts.C * sol.sigma;
    return sol;
  }

  // A scale-free bound on the magnitude of the smooth gradient, used to seed
  // the backtracking step so that accepted steps scale with the data.
  double gnorm_bound = prob.M.cwiseAbs().colwise().sum().maxCoeff() /
                       (n * xi * v_star.minCoeff());
  gnorm_bound = std::max(gnorm_bound, std::sqrt(prob.M.diagonal().maxCoeff() / n));
  gnorm_bound = std::max(gnorm_bound, 1e-300);

  Vector best = Vector::Zero(p);
  double best_obj = obj0;

  Vector beta = Vector::Zero(p);
  for (int level = 0; level < opts.smoothing_levels; ++level) {
    const double mu = sigma0 * std::pow(10.0, -1.0 - level);
    double step = mu / (opts.C * gnorm_bound * gnorm_bound);
    Vector x_prev = beta;
    Vector z = beta;  // extrapolated point
    double t_prev = 1.0;
    Vector grad(p);

    for (int it = 0; it < opts.iters_per_level; ++it) {
      const double fz = prob.smooth_value_grad(z, mu, grad);
      Vector x_next(p);
      // Backtracking on the smooth-part majorization at z.
      for (int bt = 0; bt < 80; ++bt) {
        for (Index j = 0; j < p; ++j)
          x_next[j] = soft(z[j] - step * grad[j], step * v_star[j]);
        const Vector delta = x_next - z;
        Vector dummy(p);
        const double fx = prob.smooth_value_grad(x_next, mu, dummy);
        if (fx <= fz + grad.dot(delta) + delta.squaredNorm() / (2.0 * step) +
                      1e-12 * sigma0 * opts.C)
          break;
        step *= 0.5;
      }

      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_prev * t_prev));
      z = x_next + ((t_prev - 1.0) / t_next) * (x_next - x_prev);

      const double move = (x_next - x_prev).cwiseAbs().maxCoeff();
      x_prev = x_next;
      t_prev = t_next;

      const double obj = prob.objective(x_next);
      if (obj < best_obj) {
        best_obj = obj;
        best = x_next;
      }
      const double beta_scale = sigma0 / (opts.C * v_star.minCoeff());
      if (move <= 1e-13 * (x_next.cwiseAbs().maxCoeff() + beta_scale)) break;
    }
    beta = best;  // warm start the next level from the incumbent
  }

  sol.beta = best;
  double sigma = 0.0;
  prob.objective(best, &sigma);
  sigma = std::max(sigma, opts.sigma_floor);
  sol.sigma = sigma;
  const Vector r = v0 - v * best;
  sol.slack_inf = sigma * xi -
                  (r.transpose() * v).cwiseAbs().transpose().cwiseQuotient(v_star).maxCoeff() / n;
  sol.slack_l2 = sigma * sigma - r.squaredNorm() / n;
  sol.objective = (v_star.array() * best.array().abs()).sum() + opts.C * sigma;
  return sol;
}

double b_n_delta(const Matrix& v, const Vector& eta_hat, double delta_prime) {
  if (eta_hat.size() != v.rows())
    throw std::invalid_argument("b_n_delta: dimension mismatch");
  if (!(delta_prime > 0.0))
    throw std::invalid_argument("b_n_delta: delta_prime must be positive");
  const Index p = v.cols();
  const double n = static_cast<double>(v.rows());
  double ratio_min = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < p; ++j) {
    const Vector z = v.col(j).cwiseProduct(eta_hat);
    const double num = std::sqrt(z.squaredNorm() / n);
    if (!(num > 0.0))
      throw std::invalid_argument("b_n_delta: degenerate column in v * eta");
    const double den =
        std::pow(z.cwiseAbs().array().pow(2.0 + delta_prime).mean(),
                 1.0 / (2.0 + delta_prime));
    ratio_min = std::min(ratio_min, num / den);
  }
  return std::pow(n, delta_prime / (4.0 + 2.0 * delta_prime)) * ratio_min;
}

double alpha_level(double a, Index p, double b_n, double delta_prime, double a0) {
  if (!(a >= 1.0)) throw std::invalid_argument("alpha_level: a must be >= 1");
  if (p < 2) throw std::invalid_argument("alpha_level: p must be >= 2");
  if (!(b_n > 0.0)) throw std::invalid_argument("alpha_level: b_n must be positive");
  const double dp = static_cast<double>(p);
  const double t = a * std::sqrt(2.0 * std::log(dp));
  const double tail = 2.0 * dp * norm_cdf(-t);
  const double second = 2.0 * a0 * std::pow(1.0 + t, 1.0 + delta_prime) /
                        (std::pow(dp, a * a - 1.0) * std::pow(b_n, 2.0 + delta_prime));
  return std::min(1.0, std::max(0.0, tail + second));
}

double default_xi(Index p, Index n_s, double Q_hat_beta, double beta_l1, double L,
                  double b_sigma_v, double B_prime, double v_star_min, double a,
                  double c0) {
  if (p < 2 || n_s < 1) throw std::invalid_argument("default_xi: bad dimensions");
  if (!(a >= 1.0) || !(c0 > 1.0))
    throw std::invalid_argument("default_xi: need a >= 1 and c0 > 1");
  const double noise =
      c0 * std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n_s));
  double first_stage = 0.0;
  if (B_prime > 0.0 && Q_hat_beta > 0.0 && v_star_min > 0.0) {
    first_stage = beta_l1 * L * b_sigma_v * std::sqrt(B_prime) /
                  (std::sqrt(Q_hat_beta) * v_star_min);
  }
  return a * std::max(noise, first_stage);
}

XiIterationResult iterate_xi(const Vector& v0, const Matrix& v, double xi0,
                             const XiIterationConfig& cfg, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("iterate_xi: tol must be positive");
  const Index p = v.cols();
  const Index n = v.rows();
  const Vector v_star = scaling_matrix(v, v).first;
  const double v_star_min = v_star.minCoeff();

  XiIterationResult out;
  double xi = xi0;
  Vector prev;
  for (int round = 0; round < cfg.max_rounds; ++round) {
    out.solution = solve_pivotal(v0, v, xi, v_star, cfg.solver);
    out.history.push_back({xi, out.solution.beta.cwiseAbs().sum(),
                           out.solution.objective});
    if (round > 0 && (out.solution.beta - prev).norm() <= tol) {
      out.converged = true;
      return out;
    }
    prev = out.solution.beta;

    const Vector r = v0 - v * out.solution.beta;
    const double Q_hat = r.squaredNorm() / static_cast<double>(n);
    const double next = default_xi(p, n, Q_hat, prev.cwiseAbs().sum(), cfg.L,
                                   cfg.b_sigma_v, cfg.B_prime, v_star_min, cfg.a,
                                   cfg.c0);
    if (next > 1e6 * std::max(xi0, 1e-300)) {
      out.diverged = true;
      out.converged = false;
      return out;
    }
    xi = next;
  }
  out.converged = false;
  return out;
}

double l2_sensitivity_bound(const Matrix& v, const Vector& v_star,
                            const IndexSet& support, double phi_cone, int n_dirs,
                            std::uint64_t seed) {
  if (n_dirs < 1)
    throw std::invalid_argument("l2_sensitivity_bound: n_dirs must be >= 1");
  if (!(phi_cone > 0.0))
    throw std::invalid_argument("l2_sensitivity_bound: phi_cone must be positive");
  if (v_star.size() != v.cols() || v_star.minCoeff() <= 0.0)
    throw std::invalid_argument("l2_sensitivity_bound: bad scaling vector");
  const Index p = v.cols();
  const double n = static_cast<double>(v.rows());
  const Matrix M = v.transpose() * v;
  Rng rng(seed, 0x5e4eULL);
  double best = std::numeric_limits<double>::infinity();
  for (int t = 0; t < n_dirs; ++t) {
    Vector delta(p);
    for (Index j = 0; j < p; ++j) delta[j] = rng.normal();
    if (!support.empty() && static_cast<Index>(support.size()) < p) {
      double l1_s = 0.0, l1_c = 0.0;
      for (Index j = 0; j < p; ++j)
        (support.count(j) ? l1_s : l1_c) += std::abs(delta[j]);
      if (l1_c > phi_cone * l1_s && l1_c > 0.0) {
        const double shrink = phi_cone * l1_s / l1_c;
        for (Index j = 0; j < p; ++j)
          if (!support.count(j)) delta[j] *= shrink;
      }
    }
    // Normalize by the larger of the two norms the error bounds divide by, so
    // the reported value is valid for both uses of the sensitivity.
    const double denom =
        std::max(delta.lpNorm<1>(), (v_star.asDiagonal() * delta).norm());
    if (denom == 0.0) continue;
    const Vector scaled = (M * delta).cwiseQuotient(v_star);
    best = std::min(best, scaled.cwiseAbs().maxCoeff() / (n * denom));
  }
  return best;
}

PivotalCI confidence_intervals(const DantzigSolution& sol, double kappa_star, Index k2,
                               double L, double b_sigma_v, double B_prime,
                               double alpha) {
  if (!(kappa_star > 0.0))
    throw std::invalid_argument("confidence_intervals: kappa_star must be positive");
  PivotalCI ci;
  ci.kappa_star = kappa_star;
  ci.alpha = alpha;
  const Index p = sol.d_diag.size();
  ci.halfwidth_coord = Vector::Constant(p, std::numeric_limits<double>::infinity());

  const double v_star_min = sol.d_diag.cwiseInverse().minCoeff();
  const double fs = B_prime > 0.0
                        ? L * b_sigma_v * std::sqrt(B_prime) / v_star_min
                        : 0.0;
  const double beta_l1 = sol.beta.cwiseAbs().sum();
  const double lead = fs * beta_l1 + 2.0 * sol.xi * sol.sigma;

  const double shrink = 1.0 - sol.xi * sol.xi / kappa_star;
  if (!(shrink > 0.0)) {
    ci.bounded = false;
    ci.halfwidth_l2 = std::numeric_limits<double>::infinity();
    return ci;
  }
  double correction = 1.0;
  if (B_prime > 0.0) {
    correction = 1.0 - (L * b_sigma_v * std::sqrt(static_cast<double>(k2) * B_prime) /
                        (v_star_min * v_star_min)) /
                           (kappa_star * shrink);
    if (!(correction > 0.0)) {
      ci.bounded = false;
      ci.halfwidth_l2 = std::numeric_limits<double>::infinity();
      return ci;
    }
  }
  ci.halfwidth_l2 = lead / (kappa_star * shrink * correction);
  for (Index j = 0; j < p; ++j)
    ci.halfwidth_coord[j] = ci.halfwidth_l2 * sol.d_diag[j];
  ci.bounded = true;
  return ci;
}

}  // namespace hsel
