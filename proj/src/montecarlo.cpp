#include "hsel/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <thread>

#include "hsel/bias.hpp"
#include "hsel/lasso.hpp"
#include "hsel/lipschitz.hpp"
#include "hsel/rng.hpp"

namespace hsel {

namespace {

double error_variance(const SimConfig& cfg) {
  return cfg.sigma2_is_variance ? cfg.sigma2 : cfg.sigma2 * cfg.sigma2;
}

// Index coefficients: k1 - 1 leading coordinates plus coordinate p, the
// regressor excluded from the main equation.
std::vector<Index> theta_support(const SimConfig& cfg) {
  std::vector<Index> s;
  for (Index j = 0; j + 1 < cfg.k1; ++j) s.push_back(j);
  s.push_back(cfg.p);
  return s;
}

// Main-equation coefficients: k2 - 1 leading coordinates plus the last one.
std::vector<Index> beta_support(const SimConfig& cfg) {
  std::vector<Index> s;
  for (Index j = 0; j + 1 < cfg.k2; ++j) s.push_back(j);
  s.push_back(cfg.p - 1);
  return s;
}

// Small coefficients below tau are noise at this sample size; zero them so the
// sign-selection metric reflects the support, not soft-thresholding residue.
void hard_threshold(Vector& beta, double tau) {
  for (Index j = 0; j < beta.size(); ++j)
    if (std::abs(beta[j]) < tau) beta[j] = 0.0;
}

Vector run_full_pipeline(const SimConfig& cfg, const DgpDraw& draw) {
  const double lambda1 = default_lambda1(cfg.n, cfg.d, cfg.lambda1_scale);
  const GlmFamily family{cfg.family};
  const GlmFit stage1 = fit_l1_glm(draw.dataset.w, draw.dataset.y1, lambda1, family);

  const LipschitzOptions lopts{.monotone = cfg.monotone_stage2};
  const ResidualBundle bundle = residualize(draw.dataset, stage1.theta, cfg.L, lopts);
  Vector v0 = bundle.v0;
  Matrix v = bundle.v;
  if (cfg.demean_stage3) {
    v = demean_columns(v).first;
    v0.array() -= v0.mean();
  }
  LassoConfig lcfg;
  lcfg.lambda3 = default_lambda3(cfg.k1, cfg.k2, cfg.d, draw.dataset.n_selected(),
                                 cfg.lambda3_scale);
  Vector beta = lasso(v0, v, lcfg).beta;
  hard_threshold(beta, cfg.threshold_scale * lcfg.lambda3);
  return beta;
}

Vector run_direct_lasso(const SimConfig& cfg, const DgpDraw& draw) {
  const double lambda3 = default_lambda3(cfg.k1, cfg.k2, cfg.d,
                                         draw.dataset.n_selected(), cfg.lambda3_scale);
  Vector beta = direct_lasso_baseline(draw.dataset, lambda3).beta;
  hard_threshold(beta, cfg.threshold_scale * lambda3);
  return beta;
}

// Low-dimensional model on the oracle supports of both equations.
SelectionDataset oracle_dataset(const SimConfig& cfg, const DgpDraw& draw) {
  const std::vector<Index> ts = theta_support(cfg);
  const std::vector<Index> bs = beta_support(cfg);
  SelectionDataset low;
  low.w.resize(draw.dataset.n(), static_cast<Index>(ts.size()));
  for (Index j = 0; j < static_cast<Index>(ts.size()); ++j)
    low.w.col(j) = draw.dataset.w.col(ts[j]);
  low.y1 = draw.dataset.y1;
  low.x.resize(draw.dataset.n_selected(), static_cast<Index>(bs.size()));
  for (Index j = 0; j < static_cast<Index>(bs.size()); ++j)
    low.x.col(j) = draw.dataset.x.col(bs[j]);
  low.y2 = draw.dataset.y2;
  low.selected_rows = draw.dataset.selected_rows;
  return low;
}

Vector embed_low_dim(const SimConfig& cfg, const Vector& coefs) {
  const std::vector<Index> bs = beta_support(cfg);
  Vector beta = Vector::Zero(cfg.p);
  for (Index j = 0; j < static_cast<Index>(bs.size()); ++j) beta[bs[j]] = coefs[j];
  return beta;
}

Vector run_one(const SimConfig& cfg, int which, const DgpDraw& draw) {
  switch (which) {
    case 1:
      return run_full_pipeline(cfg, draw);
    case 2:
      return run_direct_lasso(cfg, draw);
    case 3: {
      const SelectionDataset low = oracle_dataset(cfg, draw);
      return embed_low_dim(cfg, heckman_two_step(low).beta);
    }
    case 4: {
      const SelectionDataset low = oracle_dataset(cfg, draw);
      return embed_low_dim(cfg, ols(low.x, low.y2));
    }
    default:
      throw std::invalid_argument("run_experiment: experiment id must be in 1..4");
  }
}

}  // namespace

void SimConfig::validate() const {
  if (n < 2 || d < 1 || p < 1 || p > d) throw std::invalid_argument("SimConfig: bad n/d/p");
  if (k1 < 1 || k1 > d || k2 < 1 || k2 > p)
    throw std::invalid_argument("SimConfig: bad sparsity counts");
  if (p >= d)
    throw std::invalid_argument("SimConfig: need p < d for an excluded regressor");
  if (!(std::abs(rho) < 1.0)) throw std::invalid_argument("SimConfig: |rho| must be < 1");
  if (!(sigma2 > 0.0)) throw std::invalid_argument("SimConfig: sigma2 must be positive");
  if (n_reps < 1) throw std::invalid_argument("SimConfig: n_reps must be >= 1");
  if (!(L >= 0.0) || !(lambda1_scale > 0.0) || !(lambda3_scale > 0.0) ||
      !(threshold_scale >= 0.0))
    throw std::invalid_argument("SimConfig: bad tuning scales");
  if (!(w_halfwidth > 0.0)) throw std::invalid_argument("SimConfig: bad regressor range");
  const double cov = rho * sigma2;
  if (error_variance(*this) - cov * cov < 0.0)
    throw std::invalid_argument("SimConfig: error covariance is not positive semidefinite");
  for (int e : experiments)
    if (e < 1 || e > 4) throw std::invalid_argument("SimConfig: experiment ids are 1..4");
}

DgpDraw generate_dgp(const SimConfig& cfg, std::uint64_t rep_seed) {
  cfg.validate();
  Rng rng_w(rep_seed, 100);
  Rng rng_e(rep_seed, 101);

  DgpDraw draw;
  draw.theta_star = Vector::Zero(cfg.d);
  for (Index j : theta_support(cfg)) draw.theta_star[j] = 0.5;
  draw.beta_star = Vector::Zero(cfg.p);
  for (Index j : beta_support(cfg)) draw.beta_star[j] = 1.0;

  Matrix w(cfg.n, cfg.d);
  for (Index i = 0; i < cfg.n; ++i)
    for (Index j = 0; j < cfg.d; ++j)
      w(i, j) = rng_w.uniform(-cfg.w_halfwidth, cfg.w_halfwidth);

  const double cov = cfg.rho * cfg.sigma2;
  const double resid_sd = std::sqrt(error_variance(cfg) - cov * cov);
  Vector y1(cfg.n), y2_full(cfg.n);
  const Matrix x_full = w.leftCols(cfg.p);
  for (Index i = 0; i < cfg.n; ++i) {
    const double e1 = rng_e.normal();
    const double e2 = cov * e1 + resid_sd * rng_e.normal();
    y1[i] = w.row(i).dot(draw.theta_star) + e1 > 0.0 ? 1.0 : 0.0;
    y2_full[i] = x_full.row(i).dot(draw.beta_star) + e2;
  }
  draw.dataset = make_selection_dataset(std::move(w), std::move(y1), x_full, y2_full);
  return draw;
}

double selection_percentage(const Vector& beta_hat, const Vector& beta_star) {
  if (beta_hat.size() != beta_star.size())
    throw std::invalid_argument("selection_percentage: length mismatch");
  auto sgn = [](double v) { return (v > 0.0) - (v < 0.0); };
  Index match = 0;
  for (Index j = 0; j < beta_hat.size(); ++j)
    if (sgn(beta_hat[j]) == sgn(beta_star[j])) ++match;
  return static_cast<double>(match) / static_cast<double>(beta_hat.size());
}

ExperimentCell run_experiment(const SimConfig& cfg, int which) {
  cfg.validate();
  if (which < 1 || which > 4)
    throw std::invalid_argument("run_experiment: experiment id must be in 1..4");

  ExperimentCell cell;
  cell.experiment = which;
  cell.rho = cfg.rho;
  cell.sigma2 = cfg.sigma2;
  cell.n = cfg.n;
  cell.n_reps = cfg.n_reps;
  cell.records.resize(cfg.n_reps);

  Vector beta_star = Vector::Zero(cfg.p);
  for (Index j : beta_support(cfg)) beta_star[j] = 1.0;

  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  const unsigned n_threads =
      cfg.n_threads > 0 ? static_cast<unsigned>(cfg.n_threads)
                        : std::min<unsigned>(hw, static_cast<unsigned>(cfg.n_reps));

  std::atomic<int> next_rep{0};
  auto worker = [&]() {
    for (;;) {
      const int rep = next_rep.fetch_add(1);
      if (rep >= cfg.n_reps) return;
      RepRecord& rec = cell.records[rep];
      try {
        const std::uint64_t rep_seed =
            Rng(cfg.seed, static_cast<std::uint64_t>(rep)).next_u64();
        const DgpDraw draw = generate_dgp(cfg, rep_seed);
        rec.beta_hat = run_one(cfg, which, draw);
        rec.l2_error = (rec.beta_hat - draw.beta_star).norm();
      } catch (const std::exception& ex) {
        rec.failed = true;
        rec.error = ex.what();
      }
    }
  };
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  // Aggregate over successful replications, in replication order.
  Vector beta_bar = Vector::Zero(cfg.p);
  double sum_l2 = 0.0, sum_l2sq = 0.0, sum_sel = 0.0;
  int ok = 0;
  for (const RepRecord& rec : cell.records) {
    if (rec.failed) {
      ++cell.n_failed;
      continue;
    }
    beta_bar += rec.beta_hat;
    sum_l2 += rec.l2_error;
    sum_l2sq += rec.l2_error * rec.l2_error;
    sum_sel += selection_percentage(rec.beta_hat, beta_star);
    ++ok;
  }
  if (ok == 0) throw std::runtime_error("run_experiment: every replication failed");
  beta_bar /= static_cast<double>(ok);

  cell.a = beta_bar[0];
  cell.b = beta_bar[cfg.p - 1];
  double irrelevant = 0.0;
  Index n_irrelevant = 0;
  for (Index j = 0; j < cfg.p; ++j) {
    if (beta_star[j] != 0.0) continue;
    irrelevant += beta_bar[j];
    ++n_irrelevant;
  }
  cell.c = n_irrelevant > 0 ? irrelevant / static_cast<double>(n_irrelevant) : 0.0;
  cell.d_metric = sum_l2 / static_cast<double>(ok);
  cell.e = sum_sel / static_cast<double>(ok);
  cell.f = sum_l2sq / static_cast<double>(ok);
  cell.g = (beta_bar - beta_star).squaredNorm();
  cell.flagged = cell.n_failed > cfg.n_reps / 20;

  if (which == 3 || which == 4) {
    // The low-dimensional baselines fix the irrelevant coefficients at zero,
    // so the irrelevant-mean and sign-selection metrics are not defined.
    cell.c = std::numeric_limits<double>::quiet_NaN();
    cell.e = std::numeric_limits<double>::quiet_NaN();
  }
  return cell;
}

SimReport run_simulation(const SimConfig& cfg) {
  cfg.validate();
  SimReport report;
  report.config = cfg;
  for (int which : cfg.experiments) report.cells.push_back(run_experiment(cfg, which));
  return report;
}

std::string compare_table(const std::vector<ExperimentCell>& cells) {
  if (cells.empty()) throw std::invalid_argument("compare_table: no cells");
  std::vector<const ExperimentCell*> order;
  for (const auto& c : cells) order.push_back(&c);
  std::stable_sort(order.begin(), order.end(),
                   [](const ExperimentCell* l, const ExperimentCell* r) {
                     if (l->rho != r->rho) return l->rho < r->rho;
                     return l->experiment < r->experiment;
                   });

  auto fmt = [](double v) {
    char buf[32];
    if (std::isnan(v))
      std::snprintf(buf, sizeof(buf), "%8s", "NA");
    else
      std::snprintf(buf, sizeof(buf), "%8.3f", v);
    return std::string(buf);
  };

  std::ostringstream out;
  out << "     ";
  for (const auto* c : order) {
    char head[32];
    std::snprintf(head, sizeof(head), " rho=%-3g", c->rho);
    out << head;
  }
  out << "\n     ";
  for (const auto* c : order) {
    char head[32];
    std::snprintf(head, sizeof(head), "   Exp %d", c->experiment);
    out << head;
  }
  out << "\n";
  const char* row_names[] = {"a", "b", "c", "d", "e", "f", "g"};
  for (int r = 0; r < 7; ++r) {
    out << row_names[r] << "    ";
    for (const auto* c : order) {
      double v = 0.0;
      switch (r) {
        case 0: v = c->a; break;
        case 1: v = c->b; break;
        case 2: v = c->c; break;
        case 3: v = c->d_metric; break;
        case 4: v = c->e; break;
        case 5: v = c->f; break;
        case 6: v = c->g; break;
      }
      out << fmt(v);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace hsel
