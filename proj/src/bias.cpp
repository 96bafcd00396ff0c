#include "hsel/bias.hpp"

#include <cmath>

#include "hsel/glm.hpp"
#include "hsel/lasso.hpp"
#include "hsel/rng.hpp"

namespace hsel {

BiasEstimate g_hat_closed_form(const ResidualBundle& bundle,
                               const SelectionDataset& dataset, const Vector& beta) {
  const Index p = dataset.p();
  if (beta.size() != p)
    throw std::invalid_argument("g_hat_closed_form: beta length must equal p");
  if (static_cast<Index>(bundle.fits.size()) != p + 1)
    throw std::invalid_argument("g_hat_closed_form: bundle/dataset mismatch");

  BiasEstimate out;
  out.kind = BiasEstimate::Kind::closed_form;
  out.g_at_sample = predict(bundle.fits[0], bundle.index);
  for (Index j = 0; j < p; ++j) {
    if (beta[j] == 0.0) continue;
    out.g_at_sample -= beta[j] * predict(bundle.fits[j + 1], bundle.index);
  }
  return out;
}

BiasEstimate g_tilde_nls(const SelectionDataset& dataset, const Vector& theta,
                         const Vector& beta, double L) {
  if (theta.size() != dataset.d())
    throw std::invalid_argument("g_tilde_nls: theta length must equal d");
  if (beta.size() != dataset.p())
    throw std::invalid_argument("g_tilde_nls: beta length must equal p");
  const Index ns = dataset.n_selected();
  Vector u(ns);
  for (Index i = 0; i < ns; ++i)
    u[i] = dataset.w.row(dataset.selected_rows[i]).dot(theta);
  const Vector partial = dataset.y2 - dataset.x * beta;

  BiasEstimate out;
  out.kind = BiasEstimate::Kind::nls;
  out.fit = fit_lipschitz(u, partial, L);
  out.g_at_sample = predict(out.fit, u);
  return out;
}

HeckmanFit heckman_two_step(const SelectionDataset& dataset, int n_boot,
                            std::uint64_t seed, bool include_mills) {
  const Index n = dataset.n();
  const Index ns = dataset.n_selected();
  const Index d = dataset.d();
  const Index p = dataset.p();
  if (d >= n) throw std::invalid_argument("heckman_two_step: d must be below n");
  if (p + (include_mills ? 1 : 0) >= ns)
    throw std::invalid_argument("heckman_two_step: p must be below n_selected");

  HeckmanFit out;
  const GlmFit probit = fit_glm_mle(dataset.w, dataset.y1, GlmFamily::probit());
  if (!probit.converged)
    throw std::runtime_error("heckman_two_step: probit stage did not converge");
  out.theta_probit = probit.theta;
  out.converged = true;

  const Index k = include_mills ? p + 1 : p;
  Matrix design(ns, k);
  design.leftCols(p) = dataset.x;
  if (include_mills) {
    for (Index i = 0; i < ns; ++i) {
      const double u = dataset.w.row(dataset.selected_rows[i]).dot(out.theta_probit);
      // E[error | selected] is proportional to pdf(u)/cdf(u) at the index.
      design(i, p) = inverse_mills(u);
    }
  }

  const Vector coef = ols(design, dataset.y2);
  out.beta = coef.head(p);
  out.mills_coef = include_mills ? coef[p] : 0.0;

  if (n_boot > 0) {
    Matrix draws(n_boot, k);
    for (int rep = 0; rep < n_boot; ++rep) {
      Rng rng(seed, 0x4ec3ULL + static_cast<std::uint64_t>(rep));
      Matrix db(ns, k);
      Vector yb(ns);
      for (Index i = 0; i < ns; ++i) {
        const Index r = static_cast<Index>(rng.next_below(static_cast<std::uint64_t>(ns)));
        db.row(i) = design.row(r);
        yb[i] = dataset.y2[r];
      }
      draws.row(rep) = db.colPivHouseholderQr().solve(yb).transpose();
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

SparseFit direct_lasso_baseline(const SelectionDataset& dataset, double lambda3) {
  if (dataset.n_selected() == 0)
    throw std::invalid_argument("direct_lasso_baseline: empty selected sample");
  Matrix x = demean_columns(dataset.x).first;
  Vector y = dataset.y2;
  y.array() -= y.mean();
  LassoConfig cfg;
  cfg.lambda3 = lambda3;
  return lasso(y, x, cfg);
}

Vector ols(const Matrix& x, const Vector& y) {
  if (x.rows() != y.size()) throw std::invalid_argument("ols: dimension mismatch");
  const Eigen::ColPivHouseholderQR<Matrix> qr(x);
  if (qr.rank() < x.cols()) throw std::invalid_argument("ols: rank-deficient design");
  return qr.solve(y);
}

}  // namespace hsel
