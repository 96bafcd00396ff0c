#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "hsel/dantzig.hpp"
#include "hsel/rng.hpp"

using namespace hsel;

namespace {

struct Problem {
  Vector v0;
  Matrix v;
  Vector v_star;
};

Problem random_problem(Index n, Index p, std::uint64_t seed, double noise = 1.0) {
  Rng rng(seed, 0);
  Problem pr;
  pr.v.resize(n, p);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < p; ++j) pr.v(i, j) = rng.uniform(-2.0, 2.0);
  Vector beta = Vector::Zero(p);
  beta[0] = 1.0;
  pr.v0 = pr.v * beta;
  for (Index i = 0; i < n; ++i) pr.v0[i] += noise * rng.normal();
  // Column scaling the one-argument solver entry point applies.
  pr.v_star.resize(p);
  for (Index j = 0; j < p; ++j) pr.v_star[j] = pr.v.col(j).cwiseAbs().maxCoeff();
  return pr;
}

// Objective of the sigma-eliminated program: the optimal sigma at fixed beta
// is the larger of the two constraint levels.
double objective(const Problem& pr, const Vector& beta, double xi, double C) {
  const Index n = pr.v0.size();
  const Vector r = pr.v0 - pr.v * beta;
  const double q = r.norm() / std::sqrt(static_cast<double>(n));
  double s = 0.0;
  for (Index j = 0; j < pr.v.cols(); ++j)
    s = std::max(s, std::abs(pr.v.col(j).dot(r)) / (n * xi * pr.v_star[j]));
  double l1 = 0.0;
  for (Index j = 0; j < pr.v.cols(); ++j) l1 += pr.v_star[j] * std::abs(beta[j]);
  return l1 + C * std::max(q, s);
}

// Independent minimizer for tiny p: Nelder-Mead with shrinking restarts. The
// objective is convex, so repeated restarts from the incumbent converge.
Vector nelder_mead(const Problem& pr, double xi, double C, Vector start) {
  const Index p = start.size();
  auto f = [&](const Vector& b) { return objective(pr, b, xi, C); };
  Vector best = start;
  double scale = 1.0;
  for (int round = 0; round < 60; ++round) {
    std::vector<Vector> simplex(p + 1, best);
    for (Index j = 0; j < p; ++j) simplex[j + 1][j] += scale;
    std::vector<double> fv(p + 1);
    for (Index k = 0; k <= p; ++k) fv[k] = f(simplex[k]);
    for (int it = 0; it < 500; ++it) {
      // Order the simplex.
      std::vector<Index> ord(p + 1);
      for (Index k = 0; k <= p; ++k) ord[k] = k;
      std::sort(ord.begin(), ord.end(), [&](Index a, Index b) { return fv[a] < fv[b]; });
      const Index lo = ord[0], hi = ord[p], nh = ord[p - 1];
      Vector centroid = Vector::Zero(p);
      for (Index k = 0; k <= p; ++k)
        if (k != hi) centroid += simplex[k];
      centroid /= static_cast<double>(p);
      const Vector refl = centroid + (centroid - simplex[hi]);
      const double fr = f(refl);
      if (fr < fv[lo]) {
        const Vector exp_pt = centroid + 2.0 * (centroid - simplex[hi]);
        const double fe = f(exp_pt);
        simplex[hi] = fe < fr ? exp_pt : refl;
        fv[hi] = std::min(fe, fr);
      } else if (fr < fv[nh]) {
        simplex[hi] = refl;
        fv[hi] = fr;
      } else {
        const Vector con = centroid + 0.5 * (simplex[hi] - centroid);
        const double fc = f(con);
        if (fc < fv[hi]) {
          simplex[hi] = con;
          fv[hi] = fc;
        } else {
          for (Index k = 0; k <= p; ++k) {
            if (k == lo) continue;
            simplex[k] = simplex[lo] + 0.5 * (simplex[k] - simplex[lo]);
            fv[k] = f(simplex[k]);
          }
        }
      }
      double spread = 0.0;
      for (Index k = 0; k <= p; ++k) spread = std::max(spread, fv[k] - fv[ord[0]]);
      if (spread < 1e-13) break;
    }
    Index lo = 0;
    for (Index k = 1; k <= p; ++k)
      if (fv[k] < fv[lo]) lo = k;
    if (f(simplex[lo]) < f(best)) best = simplex[lo];
    scale *= 0.6;
  }
  return best;
}

}  // namespace

TEST_CASE("scaling matrix takes the elementwise max of 2|x| and |v|") {
  Matrix x(2, 2), v(2, 2);
  x << 1, -3, 2, 0.5;
  v << 5, 1, -1, 2;
  const auto [v_star, d_diag] = scaling_matrix(x, v);
  CHECK(v_star[0] == 5.0);   // |v| wins over 2|x| = 4
  CHECK(v_star[1] == 6.0);   // 2|x| = 6 wins
  CHECK(d_diag[0] == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(d_diag[1] == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("solutions are feasible and beat the zero anchor on random instances") {
  int count = 0;
  for (int k = 0; k < 100; ++k) {
    const Index n = 20 + (k % 4) * 10;
    const Index p = 3 + (k % 6);
    const Problem pr = random_problem(n, p, 5000 + k);
    const double xi = 0.2 + 0.1 * (k % 5);
    const DantzigSolution sol = solve_pivotal(pr.v0, pr.v, xi);
    REQUIRE(sol.solved);
    CHECK(sol.slack_inf >= -1e-9);
    CHECK(sol.slack_l2 >= -1e-9);
    CHECK(sol.objective <= objective(pr, Vector::Zero(p), xi, 1.0) + 1e-9);
    CHECK(sol.objective ==
          doctest::Approx(objective(pr, sol.beta, xi, 1.0)).epsilon(1e-8));
    ++count;
  }
  CHECK(count == 100);
}

TEST_CASE("solution is positively homogeneous in the response") {
  const Problem pr = random_problem(30, 4, 99);
  const double xi = 0.3;
  const DantzigSolution base = solve_pivotal(pr.v0, pr.v, xi);
  for (double c : {0.01, 3.0, 250.0}) {
    const DantzigSolution scaled = solve_pivotal(c * pr.v0, pr.v, xi);
    CHECK((scaled.beta - c * base.beta).cwiseAbs().maxCoeff() <=
          1e-8 * std::max(1.0, c * base.beta.cwiseAbs().maxCoeff()));
    CHECK(scaled.sigma == doctest::Approx(c * base.sigma)
                              .epsilon(1e-8)
                              .scale(std::max(1.0, c * base.sigma)));
  }
}

TEST_CASE("objective is non-increasing in the tuning level") {
  const Problem pr = random_problem(40, 5, 123);
  double prev = std::numeric_limits<double>::infinity();
  for (double xi : {0.05, 0.1, 0.2, 0.4, 0.8, 1.6}) {
    const double obj = solve_pivotal(pr.v0, pr.v, xi).objective;
    CHECK(obj <= prev + 1e-9);
    prev = obj;
  }
}

TEST_CASE("solver matches an independent minimizer at small dimension") {
  for (int k = 0; k < 8; ++k) {
    const Problem pr = random_problem(25, 3, 7000 + k, 0.5);
    const double xi = 0.25;
    const DantzigSolution sol = solve_pivotal(pr.v0, pr.v, xi);
    const Vector oracle = nelder_mead(pr, xi, 1.0, sol.beta.array() + 0.5);
    const double f_sol = objective(pr, sol.beta, xi, 1.0);
    const double f_orc = objective(pr, oracle, xi, 1.0);
    // Neither side may beat the other by more than the solver tolerance.
    CHECK(f_sol <= f_orc * (1.0 + 1e-4) + 1e-8);
  }
}

TEST_CASE("moment-ratio factor and significance level formulas") {
  Rng rng(4, 0);
  const Index n = 200, p = 4;
  Matrix v(n, p);
  Vector eta(n);
  for (Index i = 0; i < n; ++i) {
    eta[i] = rng.normal();
    for (Index j = 0; j < p; ++j) v(i, j) = rng.uniform(-2.0, 2.0);
  }
  const double b1 = b_n_delta(v, eta, 1.0);
  CHECK(b1 > 0.0);
  CHECK(std::isfinite(b1));
  // Direct reimplementation for one column set.
  const double dp = 1.0;
  double min_ratio = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < p; ++j) {
    double m2 = 0.0, md = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double a = std::abs(v(i, j) * eta[i]);
      m2 += a * a;
      md += std::pow(a, 2.0 + dp);
    }
    m2 /= n;
    md /= n;
    min_ratio = std::min(min_ratio, std::sqrt(m2) / std::pow(md, 1.0 / (2.0 + dp)));
  }
  const double expect =
      std::pow(static_cast<double>(n), dp / (4.0 + 2.0 * dp)) * min_ratio;
  CHECK(b1 == doctest::Approx(expect).epsilon(1e-12));

  // alpha decreases as the slope parameter grows and stays in (0, 1) for
  // reasonable inputs.
  const double a1 = alpha_level(1.5, 45, b1, 1.0);
  const double a2 = alpha_level(3.0, 45, b1, 1.0);
  CHECK(a1 > a2);
  CHECK(a2 > 0.0);
}

TEST_CASE("tuning-level rule and its plug-in iteration") {
  const double xi_noise = default_xi(45, 44, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0);
  CHECK(xi_noise ==
        doctest::Approx(1.01 * std::sqrt(std::log(45.0) / 44.0)).epsilon(1e-12));
  // The first-stage branch can only raise the level.
  const double xi_full = default_xi(45, 44, 1.0, 2.0, 1.0, 0.5, 0.1, 1.0);
  CHECK(xi_full >= xi_noise);
  // The slope parameter multiplies the whole rule.
  CHECK(default_xi(45, 44, 0.0, 0.0, 1.0, 0.0, 0.0, 1.0, 2.0) ==
        doctest::Approx(2.0 * xi_noise).epsilon(1e-12));

  const Problem pr = random_problem(60, 6, 321, 0.5);
  XiIterationConfig cfg;
  const XiIterationResult res = iterate_xi(pr.v0, pr.v, 0.3, cfg, 1e-5);
  CHECK(res.converged);
  CHECK(!res.diverged);
  CHECK(res.history.size() >= 1);
  CHECK(res.solution.xi > 0.0);
  // The final record reflects the returned solution.
  const XiIterationRecord& last = res.history.back();
  CHECK(last.xi == doctest::Approx(res.solution.xi).epsilon(1e-12));
  CHECK(last.beta_l1 == doctest::Approx(res.solution.beta.lpNorm<1>()).epsilon(1e-10));
}

TEST_CASE("sensitivity probe and interval construction") {
  const Problem pr = random_problem(50, 5, 777, 0.5);
  const DantzigSolution sol = solve_pivotal(pr.v0, pr.v, 0.3);
  const double kappa = l2_sensitivity_bound(pr.v, pr.v_star, IndexSet{0}, 3.0, 300, 11);
  CHECK(kappa > 0.0);
  // More sampled directions can only lower the sampled infimum.
  CHECK(l2_sensitivity_bound(pr.v, pr.v_star, IndexSet{0}, 3.0, 1200, 11) <=
        kappa + 1e-15);

  const PivotalCI ci = confidence_intervals(sol, kappa, 2, 1.0, 0.0, 0.0);
  if (sol.xi * sol.xi < kappa) {
    CHECK(ci.bounded);
    CHECK(ci.halfwidth_l2 > 0.0);
    REQUIRE(ci.halfwidth_coord.size() == sol.beta.size());
    for (Index j = 0; j < sol.beta.size(); ++j)
      CHECK(ci.halfwidth_coord[j] ==
            doctest::Approx(ci.halfwidth_l2 * sol.d_diag[j]).epsilon(1e-12));
  } else {
    CHECK(!ci.bounded);
  }
  // Degenerate shrinkage factor flags the interval as unbounded.
  const PivotalCI bad = confidence_intervals(sol, sol.xi * sol.xi * 0.5, 2, 1.0, 0.0, 0.0);
  CHECK(!bad.bounded);
}
