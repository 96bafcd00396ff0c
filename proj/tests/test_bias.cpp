#include <doctest.h>

#include <cmath>

#include "hsel/bias.hpp"
#include "hsel/lasso.hpp"
#include "hsel/montecarlo.hpp"
#include "hsel/normal.hpp"
#include "hsel/rng.hpp"

using namespace hsel;

namespace {

// Selection dataset whose outcome is x.beta plus a known shift function of the
// index, with no noise.
SelectionDataset exact_dataset(Index n, Index d, Index p, const Vector& theta,
                               const Vector& beta, std::uint64_t seed,
                               double (*shift)(double)) {
  Rng rng(seed, 0);
  Matrix w(n, d);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < d; ++j) w(i, j) = rng.uniform(-2.0, 2.0);
  Vector y1(n);
  for (Index i = 0; i < n; ++i) y1[i] = rng.uniform() < 0.7 ? 1.0 : 0.0;
  const Matrix x_full = w.leftCols(p);
  Vector y2_full(n);
  for (Index i = 0; i < n; ++i)
    y2_full[i] = x_full.row(i).dot(beta) + shift(w.row(i).dot(theta));
  return make_selection_dataset(w, y1, x_full, y2_full);
}

}  // namespace

TEST_CASE("closed-form bias estimate is an identity at the fitted values") {
  // g_hat = fit(y2) - sum_j beta_j fit(x_j) means y2 - x.beta - g_hat equals
  // v0 - v.beta exactly, whatever the data.
  Rng rng(3, 1);
  const Index n = 60, d = 5, p = 3;
  Vector theta = Vector::Zero(d);
  theta[0] = 0.5;
  theta[4] = 0.5;
  Vector beta(p);
  beta << 1.0, -0.5, 0.25;
  const SelectionDataset ds =
      exact_dataset(n, d, p, theta, beta, 17, [](double u) { return std::tanh(u); });
  const ResidualBundle bundle = residualize(ds, theta, 1.0);
  const BiasEstimate g = g_hat_closed_form(bundle, ds, beta);
  REQUIRE(g.g_at_sample.size() == ds.n_selected());
  const Vector lhs = ds.y2 - ds.x * beta - g.g_at_sample;
  const Vector rhs = bundle.v0 - bundle.v * beta;
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("nonparametric bias estimate recovers a Lipschitz shift exactly") {
  const Index n = 120, d = 4, p = 2;
  Vector theta = Vector::Zero(d);
  theta[0] = 0.5;
  theta[3] = 0.5;
  Vector beta(p);
  beta << 1.0, -1.0;
  // Shift tanh(u) is 1-Lipschitz, and the partial residual has no noise, so
  // the L = 1 regression interpolates it.
  const SelectionDataset ds =
      exact_dataset(n, d, p, theta, beta, 23, [](double u) { return std::tanh(u); });
  const BiasEstimate g = g_tilde_nls(ds, theta, beta, 1.0);
  CHECK(g.kind == BiasEstimate::Kind::nls);
  for (Index i = 0; i < ds.n_selected(); ++i) {
    const double u = ds.w.row(ds.selected_rows[i]).dot(theta);
    CHECK(g.g_at_sample[i] == doctest::Approx(std::tanh(u)).epsilon(1e-8));
  }
  CHECK(g.fit.sse <= 1e-16);
}

TEST_CASE("two-step estimator without the correction column is least squares") {
  SimConfig cfg;
  cfg.n = 120;
  cfg.d = 6;
  cfg.p = 3;
  cfg.k1 = 2;
  cfg.k2 = 2;
  const DgpDraw draw = generate_dgp(cfg, 5);
  const HeckmanFit plain = heckman_two_step(draw.dataset, 0, 0, false);
  REQUIRE(plain.converged);
  CHECK(plain.mills_coef == 0.0);
  const Vector direct = ols(draw.dataset.x, draw.dataset.y2);
  CHECK((plain.beta - direct).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("two-step estimator corrects selection bias under correlated errors") {
  SimConfig cfg;
  cfg.n = 4000;
  cfg.d = 4;
  cfg.p = 2;
  cfg.k1 = 3;
  cfg.k2 = 2;
  cfg.rho = 0.9;
  double err_fit = 0.0, err_naive = 0.0;
  const int reps = 10;
  for (int rep = 0; rep < reps; ++rep) {
    const DgpDraw draw = generate_dgp(cfg, 11 + static_cast<std::uint64_t>(rep));
    const HeckmanFit fit = heckman_two_step(draw.dataset, rep == 0 ? 100 : 0, 7);
    REQUIRE(fit.converged);
    if (rep == 0) {
      // The first step recovers the selection coefficients.
      for (Index j : {Index{0}, Index{1}, cfg.p})
        CHECK(fit.theta_probit[j] == doctest::Approx(0.5).epsilon(0.2));
      // The correction coefficient estimates rho * sigma2 = 0.9.
      CHECK(fit.mills_coef == doctest::Approx(0.9).epsilon(0.2));
      REQUIRE(fit.se.size() == cfg.p + 1);
      for (Index j = 0; j < fit.se.size(); ++j) CHECK(fit.se[j] > 0.0);
    }
    CHECK((fit.beta - draw.beta_star).cwiseAbs().maxCoeff() < 0.1);
    err_fit += (fit.beta - draw.beta_star).norm();
    err_naive += (ols(draw.dataset.x, draw.dataset.y2) - draw.beta_star).norm();
  }
  // On average the corrected slope beats plain least squares.
  CHECK(err_fit < err_naive);
}

TEST_CASE("correction coefficient is insignificant under independent errors") {
  // With rho = 0 there is no selection bias; the t-ratio on the correction
  // column should be below 1.96 in at least 90% of replications.
  SimConfig cfg;
  cfg.n = 300;
  cfg.d = 4;
  cfg.p = 2;
  cfg.k1 = 3;
  cfg.k2 = 2;
  cfg.rho = 0.0;
  int insignificant = 0;
  const int reps = 60;
  for (int rep = 0; rep < reps; ++rep) {
    const DgpDraw draw = generate_dgp(cfg, 1000 + static_cast<std::uint64_t>(rep));
    const HeckmanFit fit = heckman_two_step(draw.dataset, 120, 3);
    if (!fit.converged) continue;
    const double t = std::abs(fit.mills_coef) / fit.se[fit.se.size() - 1];
    if (t < 1.96) ++insignificant;
  }
  CHECK(insignificant >= static_cast<int>(0.9 * reps));
}

TEST_CASE("one-step penalized baseline works on demeaned data") {
  SimConfig cfg;
  cfg.n = 200;
  cfg.d = 8;
  cfg.p = 4;
  cfg.k1 = 3;
  cfg.k2 = 2;
  const DgpDraw draw = generate_dgp(cfg, 21);
  const SparseFit fit = direct_lasso_baseline(draw.dataset, 0.1);
  REQUIRE(fit.converged);
  // Same as running the sparse solver on centered columns directly.
  const Matrix xc = demean_columns(draw.dataset.x).first;
  Vector yc = draw.dataset.y2;
  yc.array() -= yc.mean();
  LassoConfig lcfg;
  lcfg.lambda3 = 0.1;
  const SparseFit direct = lasso(yc, xc, lcfg);
  CHECK((fit.beta - direct.beta).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("least squares helper matches the normal equations and flags rank loss") {
  Rng rng(9, 0);
  Matrix x(30, 3);
  for (Index i = 0; i < 30; ++i)
    for (Index j = 0; j < 3; ++j) x(i, j) = rng.normal();
  Vector y(30);
  for (Index i = 0; i < 30; ++i) y[i] = x(i, 0) - 2.0 * x(i, 2) + 0.1 * rng.normal();
  const Vector b = ols(x, y);
  const Vector normal_eq = (x.transpose() * x).ldlt().solve(x.transpose() * y);
  CHECK((b - normal_eq).cwiseAbs().maxCoeff() <= 1e-10);

  Matrix bad = x;
  bad.col(1) = 2.0 * bad.col(0);
  CHECK_THROWS_AS(ols(bad, y), std::invalid_argument);
}
