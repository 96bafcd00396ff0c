#include "hsel/glm.hpp"

#include <cmath>

#include "hsel/normal.hpp"

namespace hsel {

namespace {

double log1pexp(double u) {
  if (u > 0.0) return u + std::log1p(std::exp(-u));
  return std::log1p(std::exp(u));
}

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

Vector soft_threshold(const Vector& v, double t) {
  return v.unaryExpr([t](double a) {
    if (a > t) return a - t;
    if (a < -t) return a + t;
    return 0.0;
  });
}

}  // namespace

double GlmFamily::phi1(double u) const {
  if (kind == GlmKind::logit) return u;
  return log_norm_cdf(u) - log_norm_cdf(-u);
}

double GlmFamily::phi2(double u) const {
  if (kind == GlmKind::logit) return log1pexp(u);
  return -log_norm_cdf(-u);
}

double GlmFamily::phi1_prime(double u) const {
  if (kind == GlmKind::logit) return 1.0;
  return inverse_mills(u) + inverse_mills(-u);
}

double GlmFamily::phi2_prime(double u) const {
  if (kind == GlmKind::logit) return sigmoid(u);
  return inverse_mills(-u);
}

double GlmFamily::nll_du(double u, double y) const {
  if (kind == GlmKind::logit) return sigmoid(u) - y;
  return -y * inverse_mills(u) + (1.0 - y) * inverse_mills(-u);
}

double GlmFamily::nll_du2(double u, double y) const {
  if (kind == GlmKind::logit) {
    const double s = sigmoid(u);
    return s * (1.0 - s);
  }
  const double m_pos = inverse_mills(u);
  const double m_neg = inverse_mills(-u);
  return y * m_pos * (u + m_pos) + (1.0 - y) * m_neg * (m_neg - u);
}

std::pair<double, Vector> nll_and_gradient(const Vector& theta, const Matrix& w,
                                           const Vector& y1, const GlmFamily& family) {
  if (theta.size() != w.cols() || y1.size() != w.rows())
    throw std::invalid_argument("nll_and_gradient: dimension mismatch");
  if (!theta.allFinite()) throw std::invalid_argument("nll_and_gradient: non-finite theta");
  const Index n = w.rows();
  const Vector u = w * theta;
  double nll = 0.0;
  Vector du(n);
  for (Index i = 0; i < n; ++i) {
    nll += -y1[i] * family.phi1(u[i]) + family.phi2(u[i]);
    du[i] = family.nll_du(u[i], y1[i]);
  }
  nll /= static_cast<double>(n);
  Vector grad = w.transpose() * du / static_cast<double>(n);
  return {nll, std::move(grad)};
}

double l1_glm_kkt_residual(const Vector& theta, const Matrix& w, const Vector& y1,
                           double lambda1, const GlmFamily& family) {
  const Vector grad = nll_and_gradient(theta, w, y1, family).second;
  double res = 0.0;
  for (Index j = 0; j < theta.size(); ++j) {
    double r;
    if (theta[j] == 0.0)
      r = std::max(0.0, std::abs(grad[j]) - lambda1);
    else
      r = std::abs(grad[j] + lambda1 * (theta[j] > 0.0 ? 1.0 : -1.0));
    res = std::max(res, r);
  }
  return res;
}

double null_threshold_lambda1(const Matrix& w, const Vector& y1, const GlmFamily& family) {
  const Vector theta0 = Vector::Zero(w.cols());
  const Vector grad = nll_and_gradient(theta0, w, y1, family).second;
  return grad.cwiseAbs().maxCoeff();
}

GlmFit fit_l1_glm(const Matrix& w, const Vector& y1, double lambda1,
                  const GlmFamily& family, const GlmOptions& opts) {
  if (lambda1 < 0.0) throw std::invalid_argument("fit_l1_glm: negative lambda1");
  if (lambda1 == 0.0) {
    const double mean = y1.mean();
    if (mean == 0.0 || mean == 1.0)
      throw std::invalid_argument("fit_l1_glm: unpenalized fit needs both classes");
  }
  const Index d = w.cols();

  auto smooth = [&](const Vector& th) { return nll_and_gradient(th, w, y1, family); };
  auto penalty = [&](const Vector& th) { return lambda1 * th.lpNorm<1>(); };

  Vector x = Vector::Zero(d);          // incumbent (monotone)
  Vector z = x;                        // extrapolation point
  auto [fx, gx] = smooth(x);
  double obj_x = fx + penalty(x);
  double step = 1.0;
  double t_momentum = 1.0;
  Vector x_prev = x;

  GlmFit fit;
  fit.lambda1 = lambda1;
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    auto [fz, gz] = smooth(z);
    // Backtracking on the majorization at z.
    Vector cand;
    double f_cand;
    for (;;) {
      cand = soft_threshold(z - step * gz, step * lambda1);
      f_cand = smooth(cand).first;
      const Vector diff = cand - z;
      const double quad = fz + gz.dot(diff) + diff.squaredNorm() / (2.0 * step);
      if (f_cand <= quad + 1e-14 * std::abs(quad)) break;
      step *= 0.5;
      if (step < 1e-16) break;
    }
    const double obj_cand = f_cand + penalty(cand);

    x_prev = x;
    const double obj_prev = obj_x;
    if (obj_cand <= obj_x) {  // monotone safeguard
      x = cand;
      obj_x = obj_cand;
    }
    if (opts.accelerate) {
      const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_momentum * t_momentum));
      z = x + (t_momentum / t_next) * (cand - x) +
          ((t_momentum - 1.0) / t_next) * (x - x_prev);
      t_momentum = t_next;
    } else {
      z = x;
    }

    const double kkt = l1_glm_kkt_residual(x, w, y1, lambda1, family);
    if (kkt <= opts.kkt_tol) {
      fit.kkt_residual = kkt;
      fit.converged = true;
      break;
    }
    if (std::abs(obj_prev - obj_x) <= opts.rel_obj_tol * std::max(1.0, std::abs(obj_x)) &&
        it > 1 && obj_cand >= obj_prev) {
      // Stalled; reset momentum once before giving up.
      if (t_momentum > 1.0) {
        t_momentum = 1.0;
        z = x;
      } else {
        fit.kkt_residual = kkt;
        fit.converged = kkt <= opts.kkt_tol;
        break;
      }
    }
  }
  fit.theta = x;
  fit.iterations = it;
  fit.nll = smooth(x).first;
  fit.kkt_residual = l1_glm_kkt_residual(x, w, y1, lambda1, family);
  fit.converged = fit.kkt_residual <= opts.kkt_tol;

  if (opts.post_lasso_refit) {
    IndexSet support = extract_support(fit.theta);
    if (!support.empty()) {
      Matrix ws(w.rows(), static_cast<Index>(support.size()));
      Index c = 0;
      for (Index j : support) ws.col(c++) = w.col(j);
      GlmFit refit = fit_glm_mle(ws, y1, family);
      Vector full = Vector::Zero(d);
      c = 0;
      for (Index j : support) full[j] = refit.theta[c++];
      fit.theta = full;
      fit.nll = nll_and_gradient(fit.theta, w, y1, family).first;
    }
  }
  return fit;
}

GlmFit fit_glm_mle(const Matrix& w, const Vector& y1, const GlmFamily& family,
                   double grad_tol, int max_iter) {
  const Index n = w.rows();
  const Index d = w.cols();
  Vector theta = Vector::Zero(d);
  auto [nll, grad] = nll_and_gradient(theta, w, y1, family);
  GlmFit fit;
  int it = 0;
  for (; it < max_iter; ++it) {
    if (grad.norm() <= grad_tol) break;
    const Vector u = w * theta;
    Vector wts(n);
    for (Index i = 0; i < n; ++i) wts[i] = family.nll_du2(u[i], y1[i]);
    Matrix hess = w.transpose() * wts.asDiagonal() * w / static_cast<double>(n);
    hess.diagonal().array() += 1e-12;
    const Vector dir = hess.ldlt().solve(-grad);
    // Step halving keeps the objective decreasing.
    double alpha = 1.0;
    Vector next = theta + alpha * dir;
    double next_nll = nll_and_gradient(next, w, y1, family).first;
    int halvings = 0;
    while (next_nll > nll && halvings++ < 60) {
      alpha *= 0.5;
      next = theta + alpha * dir;
      next_nll = nll_and_gradient(next, w, y1, family).first;
    }
    if (halvings >= 60) break;
    theta = next;
    std::tie(nll, grad) = nll_and_gradient(theta, w, y1, family);
  }
  fit.theta = theta;
  fit.nll = nll;
  fit.kkt_residual = grad.norm();
  fit.iterations = it;
  fit.converged = grad.norm() <= std::max(grad_tol, 1e-8);
  return fit;
}

double default_lambda1(Index n, Index d, double scale) {
  if (n < 2 || d < 2) throw std::invalid_argument("default_lambda1: n, d must be >= 2");
  return scale * std::sqrt(std::log(static_cast<double>(d)) / static_cast<double>(n));
}

}  // namespace hsel
