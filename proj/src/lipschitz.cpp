#include "hsel/lipschitz.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hsel/rng.hpp"

namespace hsel {

namespace {

struct MergedData {
  Vector knots;    // distinct sorted u values
  Vector targets;  // weighted mean of z within each tie group
  Vector weights;  // multiplicities
  std::vector<Index> group;  // original row -> knot id
};

MergedData merge_ties(const Vector& u, const Vector& z) {
  const Index n = u.size();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  std::sort(order.begin(), order.end(), [&](Index a, Index b) { return u[a] < u[b]; });

  MergedData md;
  md.group.resize(n);
  std::vector<double> knots, sums, wts;
  for (Index k = 0; k < n; ++k) {
    const Index i = order[k];
    if (knots.empty() || u[i] != knots.back()) {
      knots.push_back(u[i]);
      sums.push_back(0.0);
      wts.push_back(0.0);
    }
    sums.back() += z[i];
    wts.back() += 1.0;
    md.group[i] = static_cast<Index>(knots.size()) - 1;
  }
  const Index m = static_cast<Index>(knots.size());
  md.knots = Eigen::Map<Vector>(knots.data(), m);
  md.weights = Eigen::Map<Vector>(wts.data(), m);
  md.targets.resize(m);
  for (Index k = 0; k < m; ++k) md.targets[k] = sums[k] / wts[k];
  return md;
}

// Chain-constrained weighted least squares:
//   min sum_k wts_k (targets_k - f_k)^2   s.t.  lo_k <= f_{k+1} - f_k <= hi_k.
// Solved exactly by Lawson-Hanson active set on the nonnegative dual.
Vector chain_qp(const Vector& knots, const Vector& targets, const Vector& wts,
                const Vector& lo, const Vector& hi) {
  const Index m = knots.size();
  if (m == 1) return targets;
  const Index K = m - 1;
  const Index nc = 2 * K;  // rows: e_k <= hi_k, then -e_k <= -lo_k

  // A row dotted with W^{-1} A row: the dual Hessian. A is the signed
  // difference operator, so Q is pentadiagonal; built dense (m is small).
  auto sign_of = [&](Index r) { return r < K ? 1.0 : -1.0; };
  auto edge_of = [&](Index r) { return r < K ? r : r - K; };

  Matrix Q = Matrix::Zero(nc, nc);
  for (Index r = 0; r < nc; ++r) {
    const Index k = edge_of(r);
    const double sr = sign_of(r);
    for (Index s = 0; s < nc; ++s) {
      const Index l = edge_of(s);
      const double ss = sign_of(s);
      double val = 0.0;
      if (k == l)
        val = 1.0 / wts[k] + 1.0 / wts[k + 1];
      else if (l == k + 1)
        val = -1.0 / wts[k + 1];
      else if (l + 1 == k)
        val = -1.0 / wts[k];
      Q(r, s) = sr * ss * val;
    }
  }
  Vector q(nc);
  for (Index k = 0; k < K; ++k) {
    const double e = targets[k + 1] - targets[k];
    q[k] = e - hi[k];
    q[K + k] = -e + lo[k];
  }

  const double tol = 1e-11 * std::max(1.0, q.cwiseAbs().maxCoeff());
  Vector lambda = Vector::Zero(nc);
  Vector grad = q;  // q - Q*lambda
  std::vector<Index> passive;
  std::vector<char> in_passive(nc, 0);

  auto solve_passive = [&]() -> Vector {
    const Index np = static_cast<Index>(passive.size());
    Matrix Qp(np, np);
    Vector qp(np);
    for (Index a = 0; a < np; ++a) {
      qp[a] = q[passive[a]];
      for (Index b = 0; b < np; ++b) Qp(a, b) = Q(passive[a], passive[b]);
    }
    return Qp.ldlt().solve(qp);
  };

  const int max_outer = static_cast<int>(6 * nc + 60);
  for (int outer = 0; outer < max_outer; ++outer) {
    Index best = -1;
    double best_w = tol;
    for (Index r = 0; r < nc; ++r)
      if (!in_passive[r] && grad[r] > best_w) {
        best_w = grad[r];
        best = r;
      }
    if (best < 0) break;
    passive.push_back(best);
    in_passive[best] = 1;

    for (int inner = 0; inner < max_outer; ++inner) {
      Vector s = solve_passive();
      bool ok = true;
      for (Index a = 0; a < static_cast<Index>(s.size()); ++a)
        if (s[a] <= 0.0) ok = false;
      if (ok) {
        for (size_t a = 0; a < passive.size(); ++a) lambda[passive[a]] = s[a];
        break;
      }
      // Step toward s until the first passive multiplier hits zero.
      double theta = 1.0;
      for (size_t a = 0; a < passive.size(); ++a) {
        if (s[a] <= 0.0) {
          const double la = lambda[passive[a]];
          theta = std::min(theta, la / (la - s[a]));
        }
      }
      for (size_t a = 0; a < passive.size(); ++a) {
        lambda[passive[a]] += theta * (s[a] - lambda[passive[a]]);
      }
      for (size_t a = passive.size(); a-- > 0;) {
        if (lambda[passive[a]] <= 1e-14 * std::max(1.0, lambda.cwiseAbs().maxCoeff())) {
          in_passive[passive[a]] = 0;
          lambda[passive[a]] = 0.0;
          passive.erase(passive.begin() + static_cast<std::ptrdiff_t>(a));
        }
      }
      if (passive.empty()) break;
    }
    grad = q - Q * lambda;
  }

  // Recover the primal: f = targets - W^{-1} A^T lambda.
  Vector f = targets;
  for (Index r = 0; r < nc; ++r) {
    if (lambda[r] == 0.0) continue;
    const Index k = edge_of(r);
    const double sr = sign_of(r);
    f[k] += sr * lambda[r] / wts[k];
    f[k + 1] -= sr * lambda[r] / wts[k + 1];
  }
  // Snap residual constraint violations from finite arithmetic.
  for (Index k = 0; k < K; ++k) {
    const double e = f[k + 1] - f[k];
    if (e > hi[k]) f[k + 1] = f[k] + hi[k];
    if (e < lo[k]) f[k + 1] = f[k] + lo[k];
  }
  return f;
}

}  // namespace

LipschitzFit fit_lipschitz(const Vector& u, const Vector& z, double L,
                           const LipschitzOptions& opts) {
  if (u.size() != z.size() || u.size() == 0)
    throw std::invalid_argument("fit_lipschitz: bad input sizes");
  if (!u.allFinite() || !z.allFinite() || !(L >= 0.0))
    throw std::invalid_argument("fit_lipschitz: non-finite input");

  MergedData md = merge_ties(u, z);
  const Index m = md.knots.size();

  LipschitzFit fit;
  fit.L = L;
  fit.knots = md.knots;

  if (m == 1 || (L == 0.0 && !opts.monotone)) {
    // Only constant functions are feasible.
    const double mean = (md.weights.array() * md.targets.array()).sum() / md.weights.sum();
    fit.values = Vector::Constant(m, mean);
  } else {
    Vector hi(m - 1), lo(m - 1);
    for (Index k = 0; k + 1 < m; ++k) {
      const double c = L * (md.knots[k + 1] - md.knots[k]);
      hi[k] = c;
      lo[k] = opts.monotone ? 0.0 : -c;
    }
    fit.values = chain_qp(md.knots, md.targets, md.weights, lo, hi);
  }

  double sse = 0.0;
  for (Index i = 0; i < u.size(); ++i) {
    const double r = z[i] - fit.values[md.group[i]];
    sse += r * r;
  }
  fit.sse = sse;
  return fit;
}

double predict(const LipschitzFit& fit, double u0) {
  const Vector& k = fit.knots;
  const Index m = k.size();
  if (u0 <= k[0]) return fit.values[0];
  if (u0 >= k[m - 1]) return fit.values[m - 1];
  // Bracketing knot strictly above u0.
  const double* begin = k.data();
  const Index hi = static_cast<Index>(std::upper_bound(begin, begin + m, u0) - begin);
  const Index lo = hi - 1;
  if (u0 == k[lo]) return fit.values[lo];
  const double t = (u0 - k[lo]) / (k[hi] - k[lo]);
  return fit.values[lo] + t * (fit.values[hi] - fit.values[lo]);
}

Vector predict(const LipschitzFit& fit, const Vector& u) {
  Vector out(u.size());
  for (Index i = 0; i < u.size(); ++i) out[i] = predict(fit, u[i]);
  return out;
}

double cross_validate_L(const Vector& u, const Vector& z, double L0,
                        double split_fraction, int max_doublings, std::uint64_t seed) {
  if (!(L0 > 0.0)) throw std::invalid_argument("cross_validate_L: L0 must be positive");
  if (!(split_fraction > 0.0 && split_fraction < 1.0))
    throw std::invalid_argument("cross_validate_L: split_fraction must be in (0,1)");
  const Index n = u.size();
  std::vector<Index> order(n);
  std::iota(order.begin(), order.end(), Index{0});
  Rng rng(seed, 0x4c697073ULL);
  for (Index i = n - 1; i > 0; --i)
    std::swap(order[i], order[rng.next_below(static_cast<std::uint64_t>(i + 1))]);
  const Index n_train = static_cast<Index>(std::llround(split_fraction * n));
  if (n_train < 1 || n_train >= n)
    throw std::invalid_argument("cross_validate_L: degenerate split");

  Vector ut(n_train), zt(n_train), uv(n - n_train), zv(n - n_train);
  for (Index i = 0; i < n_train; ++i) {
    ut[i] = u[order[i]];
    zt[i] = z[order[i]];
  }
  for (Index i = n_train; i < n; ++i) {
    uv[i - n_train] = u[order[i]];
    zv[i - n_train] = z[order[i]];
  }

  // With L free inside the training QP, SSE is non-increasing in L and flat
  // past the smallest interpolating constant, so the cap-bounded optimum is
  // min(cap, max adjacent slope of the merged training data).
  const MergedData md = merge_ties(ut, zt);
  double interp_L = 0.0;
  for (Index k = 0; k + 1 < md.knots.size(); ++k) {
    interp_L = std::max(interp_L, std::abs(md.targets[k + 1] - md.targets[k]) /
                                      (md.knots[k + 1] - md.knots[k]));
  }

  double best_L = 0.0;
  double best_err = std::numeric_limits<double>::infinity();
  double cap = L0;
  for (int k = 0; k <= max_doublings; ++k) {
    const double L_opt = std::min(cap, interp_L);
    const LipschitzFit fit = fit_lipschitz(ut, zt, L_opt);
    const double err = (zv - predict(fit, uv)).squaredNorm();
    if (err < best_err) {
      best_err = err;
      best_L = L_opt;
    }
    if (L_opt < 0.95 * cap) break;  // cap no longer binding
    cap *= 2.0;
  }
  return best_L;
}

ResidualBundle residualize(const SelectionDataset& dataset, const Vector& theta, double L,
                           const LipschitzOptions& opts) {
  if (theta.size() != dataset.d())
    throw std::invalid_argument("residualize: theta length must equal d");
  const Index ns = dataset.n_selected();
  const Index p = dataset.p();

  ResidualBundle bundle;
  bundle.index.resize(ns);
  for (Index i = 0; i < ns; ++i)
    bundle.index[i] = dataset.w.row(dataset.selected_rows[i]).dot(theta);

  bundle.fits.reserve(p + 1);
  bundle.fits.push_back(fit_lipschitz(bundle.index, dataset.y2, L, opts));
  for (Index j = 0; j < p; ++j)
    bundle.fits.push_back(fit_lipschitz(bundle.index, dataset.x.col(j), L, opts));

  bundle.v0 = dataset.y2 - predict(bundle.fits[0], bundle.index);
  bundle.v.resize(ns, p);
  for (Index j = 0; j < p; ++j)
    bundle.v.col(j) = dataset.x.col(j) - predict(bundle.fits[j + 1], bundle.index);
  return bundle;
}

}  // namespace hsel
