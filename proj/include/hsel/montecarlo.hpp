#pragma once

#include <string>

#include "hsel/glm.hpp"
#include "hsel/types.hpp"

namespace hsel {

struct SimConfig {
  Index n = 88;
  Index d = 90;
  Index p = 45;
  Index k1 = 4;
  Index k2 = 2;
  double rho = 0.0;
  double sigma2 = 1.0;
  int n_reps = 100;
  std::uint64_t seed = 1;
  std::vector<int> experiments = {1, 2, 3, 4};
  double lambda1_scale = 0.5;
  double lambda3_scale = 0.2;
  double L = 1.0;
  bool monotone_stage2 = true;  // non-decreasing Lipschitz fits in stage 2
  double threshold_scale = 0.3;  // zero sparse-stage coefficients below this * lambda3
  double w_halfwidth = 2.0;     // regressors are U[-h, h]
  bool demean_stage3 = true;    // demean residuals before the sparse stage
  bool sigma2_is_variance = true;  // Var(e2) = sigma2; false reads sigma2^2
  GlmKind family = GlmKind::probit;
  int n_threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct DgpDraw {
  SelectionDataset dataset;
  Vector theta_star;  // length d
  Vector beta_star;   // length p
};

// One draw of the simulation design: uniform regressors, sparse index
// coefficients with an excluded instrument, jointly normal errors, selection
// by the sign of the latent index. Deterministic in rep_seed.
DgpDraw generate_dgp(const SimConfig& cfg, std::uint64_t rep_seed);

// Fraction of coordinates of beta_hat sharing the sign of beta_star
// (sign(0) = 0).
double selection_percentage(const Vector& beta_hat, const Vector& beta_star);

struct RepRecord {
  Vector beta_hat;
  double l2_error = 0.0;
  bool failed = false;
  std::string error;
};

struct ExperimentCell {
  int experiment = 0;
  double rho = 0.0;
  double sigma2 = 1.0;
  Index n = 0;
  // Aggregate metrics; c and e are NaN for the low-dimensional baselines.
  double a = 0.0;  // mean estimate of the first relevant coefficient
  double b = 0.0;  // mean estimate of the last relevant coefficient
  double c = 0.0;  // mean of the averaged irrelevant estimates
  double d_metric = 0.0;  // mean l2 error
  double e = 0.0;  // mean sign-selection percentage
  double f = 0.0;  // mean squared l2 error
  double g = 0.0;  // squared bias of the mean coefficient vector
  int n_failed = 0;
  int n_reps = 0;
  bool flagged = false;  // more than 5% of replications failed
  std::vector<RepRecord> records;
};

// Runs all replications of one experiment and aggregates the metrics.
ExperimentCell run_experiment(const SimConfig& cfg, int which);

struct SimReport {
  SimConfig config;
  std::vector<ExperimentCell> cells;
};

SimReport run_simulation(const SimConfig& cfg);

// Renders cells as a rows-(a..g) by experiment table, grouped by rho, three
// decimals, NA for undefined entries. Throws if cells is empty.
std::string compare_table(const std::vector<ExperimentCell>& cells);

}  // namespace hsel
