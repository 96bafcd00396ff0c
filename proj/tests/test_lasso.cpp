#include <doctest.h>

#include <cmath>

#include "hsel/bias.hpp"
#include "hsel/lasso.hpp"
#include "hsel/rng.hpp"

using namespace hsel;

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

Matrix random_design(Index n, Index p, std::uint64_t seed) {
  Rng rng(seed, 0);
  Matrix v(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) v(i, j) = rng.uniform(-2.0, 2.0);
  return v;
}

}  // namespace

TEST_CASE("orthonormal designs reduce to coordinatewise soft thresholding") {
  // Columns scaled so (1/n) v'v = I, where the solution is known in closed
  // form: beta_j = S(v_j'y / n, lambda).
  Rng rng(1, 0);
  const Index n = 8;
  Matrix q = Matrix::Identity(n, n) * std::sqrt(static_cast<double>(n));
  // Rotate by a random orthogonal matrix (QR of a Gaussian draw).
  Matrix g(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) g(i, j) = rng.normal();
  const Matrix rot = Eigen::HouseholderQR<Matrix>(g).householderQ();
  const Matrix v = rot * q;
  Vector y(n);
  for (Index i = 0; i < n; ++i) y[i] = rng.uniform(-3.0, 3.0);

  for (double lambda : {0.05, 0.3, 1.0, 2.5}) {
    LassoConfig cfg;
    cfg.lambda3 = lambda;
    const SparseFit fit = lasso(y, v, cfg);
    REQUIRE(fit.converged);
    const Vector corr = v.transpose() * y / static_cast<double>(n);
    for (Index j = 0; j < n; ++j)
      CHECK(fit.beta[j] == doctest::Approx(soft_threshold(corr[j], lambda)).epsilon(1e-8));
  }
}

TEST_CASE("KKT certificate holds on random rectangular problems") {
  for (int k = 0; k < 30; ++k) {
    const Index n = 40, p = (k % 3 == 0) ? 60 : 15;  // include p > n
    const Matrix v = random_design(n, p, 100 + k);
    Rng rng(200 + k, 1);
    Vector beta_true = Vector::Zero(p);
    beta_true[0] = 1.0;
    beta_true[p - 1] = -1.0;
    Vector y = v * beta_true;
    for (Index i = 0; i < n; ++i) y[i] += 0.3 * rng.normal();

    LassoConfig cfg;
    cfg.lambda3 = 0.1;
    const SparseFit fit = lasso(y, v, cfg);
    REQUIRE(fit.converged);
    CHECK(fit.kkt_residual <= cfg.tol);
    CHECK(lasso_kkt_residual(fit.beta, y, v, cfg.lambda3, Vector::Ones(p)) <= cfg.tol);
    // The reported objective matches a direct evaluation.
    const double direct = 0.5 * (y - v * fit.beta).squaredNorm() / n +
                          cfg.lambda3 * fit.beta.lpNorm<1>();
    CHECK(fit.objective == doctest::Approx(direct).epsilon(1e-10));
  }
}

TEST_CASE("l1 norm of the path is non-increasing in lambda") {
  const Index n = 50, p = 20;
  const Matrix v = random_design(n, p, 7);
  Rng rng(8, 0);
  Vector y(n);
  for (Index i = 0; i < n; ++i) y[i] = v(i, 0) - v(i, 3) + 0.5 * rng.normal();
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda = 0.01; lambda < 3.0; lambda *= 1.6) {
    LassoConfig cfg;
    cfg.lambda3 = lambda;
    const double cur = lasso(y, v, cfg).beta.lpNorm<1>();
    CHECK(cur <= prev + 1e-9);
    prev = cur;
  }
  // Above the null threshold the estimate is identically zero.
  LassoConfig big;
  big.lambda3 = (v.transpose() * y).cwiseAbs().maxCoeff() / n * 1.001;
  CHECK(lasso(y, v, big).beta.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("weighted penalty rescales each coordinate by its column RMS") {
  const Index n = 60, p = 6;
  Matrix v = random_design(n, p, 12);
  v.col(2) *= 5.0;  // give one column a much larger scale
  Rng rng(3, 2);
  Vector y(n);
  for (Index i = 0; i < n; ++i) y[i] = v(i, 0) + 0.4 * rng.normal();

  LassoConfig cfg;
  cfg.lambda3 = 0.2;
  cfg.weighted = true;
  const SparseFit wfit = lasso(y, v, cfg);
  REQUIRE(wfit.converged);
  // Equivalent to the unweighted program on standardized columns.
  const Vector rms = column_rms(v);
  Matrix vs = v;
  for (Index j = 0; j < p; ++j) vs.col(j) /= rms[j];
  LassoConfig ucfg;
  ucfg.lambda3 = cfg.lambda3;
  const SparseFit ufit = lasso(y, vs, ucfg);
  for (Index j = 0; j < p; ++j)
    CHECK(wfit.beta[j] == doctest::Approx(ufit.beta[j] / rms[j]).epsilon(1e-7));
}

TEST_CASE("default_lambda3 is the advertised formula") {
  CHECK(default_lambda3(4, 2, 90, 44) ==
        doctest::Approx(0.2 * 2.0 * std::sqrt(4.0 * std::log(90.0) / 44.0))
            .epsilon(1e-15));
}

TEST_CASE("lambda iteration fixes a point of the residual-scale map") {
  const Index n = 80, p = 12;
  const Matrix v = random_design(n, p, 55);
  Rng rng(56, 0);
  Vector y(n);
  for (Index i = 0; i < n; ++i) y[i] = 2.0 * v(i, 1) + rng.normal();
  const IterateLambdaResult res = iterate_lambda3(y, v);
  REQUIRE(res.converged);
  CHECK(res.sigma_eta > 0.0);
  // The returned lambda is consistent with the returned residual scale.
  const Vector rms = column_rms(v);
  const double sigma_v = rms.maxCoeff();
  const double expect =
      2.001 * sigma_v * res.sigma_eta * std::sqrt(std::log(static_cast<double>(p)) / n);
  CHECK(res.lambda3 == doctest::Approx(expect).epsilon(1e-3));
  // And the fit satisfies its own KKT system at that lambda.
  CHECK(lasso_kkt_residual(res.fit.beta, y, v, res.lambda3, Vector::Ones(p)) <= 1e-6);
}

TEST_CASE("refit on the full support reproduces least squares exactly") {
  const Index n = 40, p = 5;
  const Matrix v = random_design(n, p, 21);
  Rng rng(22, 0);
  Vector y(n);
  for (Index i = 0; i < n; ++i) y[i] = v(i, 0) - 0.5 * v(i, 4) + rng.normal();
  IndexSet all;
  for (Index j = 0; j < p; ++j) all.insert(j);
  const PostLassoFit fit = post_lasso(y, v, all, 0, 0);
  const Vector direct = ols(v, y);
  CHECK((fit.beta_tilde - direct).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(fit.support == all);
}

TEST_CASE("refit zeroes excluded coordinates and bootstrap SEs behave") {
  const Index n = 150, p = 8;
  const Matrix v = random_design(n, p, 31);
  Rng rng(32, 0);
  Vector y(n);
  for (Index i = 0; i < n; ++i) y[i] = 1.5 * v(i, 2) + rng.normal();
  const PostLassoFit fit = post_lasso(y, v, IndexSet{2, 5}, 400, 9);
  for (Index j = 0; j < p; ++j)
    if (j != 2 && j != 5) CHECK(fit.beta_tilde[j] == 0.0);
  CHECK(fit.beta_tilde[2] == doctest::Approx(1.5).epsilon(0.15));
  REQUIRE(fit.se.size() == 2);
  CHECK(fit.se[0] > 0.0);
  CHECK(fit.se[1] > 0.0);
  // OLS SE scale for unit-variance noise and this design is ~ 1/sqrt(n var).
  CHECK(fit.se[0] < 0.3);
  // Deterministic in the seed.
  const PostLassoFit again = post_lasso(y, v, IndexSet{2, 5}, 400, 9);
  CHECK((fit.se - again.se).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("incoherence and restricted-eigenvalue diagnostics are sane") {
  const Index n = 100, p = 10;
  const Matrix v = random_design(n, p, 41);
  const IndexSet support{0, 1};
  const double inc = incoherence_stat(v, support);
  CHECK(inc >= 0.0);
  CHECK(std::isfinite(inc));
  const double re = restricted_eig_probe(v, support, 500, 3);
  CHECK(re > 0.0);
  // The sampled infimum can only decrease as more directions are tried.
  CHECK(restricted_eig_probe(v, support, 2000, 3) <= re + 1e-15);
  // Orthogonal design: incoherence is exactly zero.
  Matrix id = Matrix::Identity(p, p);
  CHECK(incoherence_stat(id, support) <= 1e-12);
}
