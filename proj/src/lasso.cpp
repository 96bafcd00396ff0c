#include "hsel/lasso.hpp"

#include <cmath>

#include "hsel/rng.hpp"

namespace hsel {

namespace {

double soft(double a, double t) {
  if (a > t) return a - t;
  if (a < -t) return a + t;
  return 0.0;
}

Vector penalty_weights(const Matrix& v, const LassoConfig& cfg) {
  const Index p = v.cols();
  if (!cfg.weighted) return Vector::Ones(p);
  Vector w = column_rms(v);
  // Floor keeps a zero-variance column from becoming unpenalized.
  const double floor = 1e-8 * std::max(w.maxCoeff(), 1e-300);
  return w.cwiseMax(floor);
}

}  // namespace

double lasso_kkt_residual(const Vector& beta, const Vector& v0, const Matrix& v,
                          double lambda, const Vector& weights) {
  const double n = static_cast<double>(v.rows());
  const Vector grad = v.transpose() * (v * beta - v0) / n;
  double res = 0.0;
  for (Index j = 0; j < beta.size(); ++j) {
    double r;
    if (beta[j] == 0.0)
      r = std::max(0.0, std::abs(grad[j]) - lambda * weights[j]);
    else
      r = std::abs(grad[j] + lambda * weights[j] * (beta[j] > 0.0 ? 1.0 : -1.0));
    res = std::max(res, r);
  }
  return res;
}

SparseFit lasso(const Vector& v0, const Matrix& v, const LassoConfig& cfg) {
  if (v0.size() != v.rows()) throw std::invalid_argument("lasso: dimension mismatch");
  if (cfg.lambda3 < 0.0) throw std::invalid_argument("lasso: negative lambda3");
  if (!(cfg.tol > 0.0)) throw std::invalid_argument("lasso: tol must be positive");
  const Index n = v.rows();
  const Index p = v.cols();
  const double dn = static_cast<double>(n);
  const Vector wts = penalty_weights(v, cfg);

  // Covariance updates: G = v'v/n, c = v'v0/n.
  const Matrix G = v.transpose() * v / dn;
  const Vector c = v.transpose() * v0 / dn;

  Vector beta = Vector::Zero(p);
  Vector Gb = Vector::Zero(p);  // G * beta, maintained incrementally
  const double lambda = cfg.lambda3;

  auto update_coord = [&](Index j) -> double {
    if (G(j, j) == 0.0) return 0.0;  // all-zero column stays out
    const double resid_corr = c[j] - Gb[j] + G(j, j) * beta[j];
    const double nb = soft(resid_corr, lambda * wts[j]) / G(j, j);
    const double delta = nb - beta[j];
    if (delta != 0.0) {
      Gb += G.col(j) * delta;
      beta[j] = nb;
    }
    return std::abs(delta);
  };

  bool active_only = false;
  for (int sweeps = 0; sweeps < cfg.max_iter; ++sweeps) {
    double max_delta = 0.0;
    for (Index j = 0; j < p; ++j) {
      if (active_only && beta[j] == 0.0) continue;
      max_delta = std::max(max_delta, update_coord(j));
    }
    const bool stalled =
        max_delta < 1e-14 * std::max(1.0, beta.cwiseAbs().maxCoeff());
    if (stalled) {
      if (!active_only) {
        if (lasso_kkt_residual(beta, v0, v, lambda, wts) <= cfg.tol) break;
      }
      active_only = false;  // verify on the full coordinate set
    } else {
      active_only = true;
    }
  }

  SparseFit fit;
  fit.lambda = lambda;
  fit.beta = beta;
  fit.support = extract_support(fit.beta);
  fit.kkt_residual = lasso_kkt_residual(fit.beta, v0, v, lambda, wts);
  fit.objective = (v0 - v * fit.beta).squaredNorm() / (2.0 * dn) +
                  lambda * (wts.array() * fit.beta.array().abs()).sum();
  fit.converged = fit.kkt_residual <= cfg.tol;
  return fit;
}

double default_lambda3(Index k1, Index k2, Index d, Index n_s, double scale) {
  if (k1 < 1 || k2 < 1 || d < 1 || n_s < 1)
    throw std::invalid_argument("default_lambda3: counts must be >= 1");
  return scale * static_cast<double>(k2) *
         std::sqrt(static_cast<double>(k1) * std::log(static_cast<double>(d)) /
                   static_cast<double>(n_s));
}

IterateLambdaResult iterate_lambda3(const Vector& v0, const Matrix& v, double c,
                                    double tol) {
  if (!(c > 2.0)) throw std::invalid_argument("iterate_lambda3: c must exceed 2");
  if (!(tol > 0.0)) throw std::invalid_argument("iterate_lambda3: tol must be positive");
  const Index n = v.rows();
  const Index p = v.cols();
  const double sigma_v = column_rms(v).maxCoeff();
  const double base = c * sigma_v * std::sqrt(std::log(static_cast<double>(p)) /
                                              static_cast<double>(n));
  IterateLambdaResult out;
  double sigma_eta = 1.0;
  const int max_rounds = 50;
  for (int t = 0; t < max_rounds; ++t) {
    LassoConfig cfg;
    cfg.lambda3 = base * sigma_eta;
    out.fit = lasso(v0, v, cfg);
    out.lambda3 = cfg.lambda3;
    const Vector r = v0 - v * out.fit.beta;
    const double mean = r.mean();
    double next = 0.0;
    if (n > 1) next = std::sqrt((r.array() - mean).square().sum() / static_cast<double>(n - 1));
    out.iterations = t + 1;
    if (std::abs(next - sigma_eta) <= tol) {
      sigma_eta = next;
      out.converged = true;
      break;
    }
    sigma_eta = next;
    out.converged = false;
  }
  out.sigma_eta = sigma_eta;
  return out;
}

PostLassoFit post_lasso(const Vector& v0, const Matrix& v, const IndexSet& support,
                        int n_boot, std::uint64_t seed) {
  const Index n = v.rows();
  const Index p = v.cols();
  PostLassoFit out;
  out.support = support;
  out.beta_tilde = Vector::Zero(p);
  out.n_boot = n_boot;
  if (support.empty()) return out;
  if (static_cast<Index>(support.size()) >= n)
    throw std::invalid_argument("post_lasso: support size must be below sample size");

  Matrix vs(n, static_cast<Index>(support.size()));
  Index col = 0;
  for (Index j : support) vs.col(col++) = v.col(j);
  const Eigen::ColPivHouseholderQR<Matrix> qr(vs);
  if (qr.rank() < vs.cols())
    throw std::invalid_argument("post_lasso: rank-deficient design on support");
  const Vector b = qr.solve(v0);
  col = 0;
  for (Index j : support) out.beta_tilde[j] = b[col++];

  if (n_boot > 0) {
    const Index k = vs.cols();
    Matrix draws(n_boot, k);
    for (int rep = 0; rep < n_boot; ++rep) {
      Rng rng(seed, 0xb007ULL + static_cast<std::uint64_t>(rep));
      Matrix vb(n, k);
      Vector yb(n);
      for (Index i = 0; i < n; ++i) {
        const Index r = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(n)));
        vb.row(i) = vs.row(r);
        yb[i] = v0[r];
      }
      draws.row(rep) = vb.colPivHouseholderQr().solve(yb).transpose();
    }
    out.se.resize(k);
    for (Index j = 0; j < k; ++j) {
      const double mean = draws.col(j).mean();
      out.se[j] = std::sqrt((draws.col(j).array() - mean).square().sum() /
                            static_cast<double>(n_boot - 1));
    }
  }
  return out;
}

double incoherence_stat(const Matrix& v, const IndexSet& support) {
  const Index p = v.cols();
  const Index k = static_cast<Index>(support.size());
  if (k == 0 || k == p) return 0.0;
  const double n = static_cast<double>(v.rows());

  Matrix vk(v.rows(), k), vkc(v.rows(), p - k);
  Index a = 0, b = 0;
  for (Index j = 0; j < p; ++j) {
    if (support.count(j))
      vk.col(a++) = v.col(j);
    else
      vkc.col(b++) = v.col(j);
  }
  const Matrix skk = vk.transpose() * vk / n;
  const Matrix sck = vkc.transpose() * vk / n;
  const Eigen::FullPivLU<Matrix> lu(skk);
  if (!lu.isInvertible())
    throw std::invalid_argument("incoherence_stat: singular Gram submatrix");
  const Matrix m = sck * lu.inverse();
  return m.cwiseAbs().rowwise().sum().maxCoeff();
}

double restricted_eig_probe(const Matrix& v, const IndexSet& support, int n_dirs,
                            std::uint64_t seed) {
  if (n_dirs < 1) throw std::invalid_argument("restricted_eig_probe: n_dirs must be >= 1");
  const Index p = v.cols();
  const double n = static_cast<double>(v.rows());
  Rng rng(seed, 0x5ee1ULL);
  double best = std::numeric_limits<double>::infinity();
  for (int t = 0; t < n_dirs; ++t) {
    Vector delta(p);
    for (Index j = 0; j < p; ++j) delta[j] = rng.normal();
    if (!support.empty() && static_cast<Index>(support.size()) < p) {
      double l1_s = 0.0, l1_c = 0.0;
      for (Index j = 0; j < p; ++j)
        (support.count(j) ? l1_s : l1_c) += std::abs(delta[j]);
      if (l1_c > 3.0 * l1_s && l1_c > 0.0) {
        const double shrink = 3.0 * l1_s / l1_c;
        for (Index j = 0; j < p; ++j)
          if (!support.count(j)) delta[j] *= shrink;
      }
    }
    const double norm = delta.norm();
    if (norm == 0.0) continue;
    delta /= norm;
    best = std::min(best, (v * delta).squaredNorm() / n);
  }
  return best;
}

}  // namespace hsel
