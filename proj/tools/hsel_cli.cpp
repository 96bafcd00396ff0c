// Command-line front end: fit the multi-stage selection-model estimator,
// run the simulation study, or run the individual estimators on CSV data.
#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <json.hpp>

#include "hsel/bias.hpp"
#include "hsel/csv.hpp"
#include "hsel/dantzig.hpp"
#include "hsel/glm.hpp"
#include "hsel/lasso.hpp"
#include "hsel/lipschitz.hpp"
#include "hsel/montecarlo.hpp"

namespace {

using nlohmann::json;
using namespace hsel;

json to_json(const Vector& v) {
  json arr = json::array();
  for (Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

json to_json(const IndexSet& s) {
  json arr = json::array();
  for (Index j : s) arr.push_back(j);
  return arr;
}

void emit(const json& out, const std::string& output_path) {
  if (output_path.empty()) {
    std::cout << out.dump(2) << "\n";
  } else {
    std::ofstream f(output_path);
    if (!f) throw std::invalid_argument("cannot open output file '" + output_path + "'");
    f << out.dump(2) << "\n";
  }
}

struct CommonOpts {
  std::string input;
  std::string output;
  std::uint64_t seed = 1;
  ColumnRoles roles;
};

void add_common(CLI::App* cmd, CommonOpts& c, bool input_required = true) {
  auto* in = cmd->add_option("--input", c.input, "input CSV path");
  if (input_required) in->required();
  cmd->add_option("--output", c.output, "write the JSON report here (default stdout)");
  cmd->add_option("--seed", c.seed, "random seed");
  cmd->add_option("--y1-col", c.roles.y1, "selection indicator column");
  cmd->add_option("--y2-col", c.roles.y2, "outcome column");
  cmd->add_option("--w-cols", c.roles.w, "selection regressor names or prefixes");
  cmd->add_option("--x-cols", c.roles.x, "main-equation regressor names or prefixes");
}

SelectionDataset load(const CommonOpts& c, json& report) {
  CsvReport info;
  SelectionDataset ds = ingest_csv(c.input, c.roles, &info);
  report["input"] = {{"path", c.input},
                     {"rows", info.n_rows},
                     {"w_columns", info.n_w},
                     {"x_columns", info.n_x},
                     {"selected_rows", ds.n_selected()},
                     {"warnings", info.warnings}};
  return ds;
}

int cmd_fit(const CommonOpts& c, double lambda1, double lambda3, bool iterate_l3,
            double L, bool cv_L, int max_doublings, int n_boot, bool demean,
            bool logit_link) {
  json out;
  SelectionDataset ds = load(c, out);

  const GlmFamily family = logit_link ? GlmFamily::logit() : GlmFamily::probit();
  if (lambda1 <= 0.0) lambda1 = default_lambda1(ds.n(), ds.d());
  const GlmFit stage1 = fit_l1_glm(ds.w, ds.y1, lambda1, family);

  Vector index(ds.n_selected());
  for (Index i = 0; i < ds.n_selected(); ++i)
    index[i] = ds.w.row(ds.selected_rows[i]).dot(stage1.theta);
  if (cv_L) L = cross_validate_L(index, ds.y2, L > 0.0 ? L : 1.0, 0.7, max_doublings, c.seed);

  const ResidualBundle bundle = residualize(ds, stage1.theta, L);
  Vector v0 = bundle.v0;
  Matrix v = bundle.v;
  if (demean) {
    v = demean_columns(v).first;
    v0.array() -= v0.mean();
  }

  SparseFit stage3;
  json stage3_json;
  if (iterate_l3) {
    const IterateLambdaResult it = iterate_lambda3(v0, v);
    stage3 = it.fit;
    stage3_json["sigma_eta"] = it.sigma_eta;
    stage3_json["lambda3_iterations"] = it.iterations;
    lambda3 = it.lambda3;
  } else {
    if (lambda3 <= 0.0) lambda3 = default_lambda3(4, 2, ds.d(), ds.n_selected());
    LassoConfig cfg;
    cfg.lambda3 = lambda3;
    stage3 = lasso(v0, v, cfg);
  }
  const PostLassoFit refit = post_lasso(v0, v, stage3.support, n_boot, c.seed);

  const BiasEstimate g_hat = g_hat_closed_form(bundle, ds, stage3.beta);
  const BiasEstimate g_tilde = g_tilde_nls(ds, stage1.theta, stage3.beta, L);

  json diag;
  if (!stage3.support.empty() && static_cast<Index>(stage3.support.size()) < v.cols()) {
    try {
      diag["incoherence"] = incoherence_stat(v, stage3.support);
    } catch (const std::exception& ex) {
      diag["incoherence_error"] = ex.what();
    }
  }
  diag["restricted_eig_probe"] = restricted_eig_probe(v, stage3.support, 200, c.seed);

  out["config"] = {{"lambda1", lambda1},       {"lambda3", lambda3},
                   {"iterate_lambda3", iterate_l3}, {"L", L},
                   {"cv_L", cv_L},             {"bootstrap", n_boot},
                   {"demean", demean},         {"link", logit_link ? "logit" : "probit"},
                   {"seed", c.seed}};
  Vector theta_copy = stage1.theta;
  out["stage1"] = {{"support", to_json(extract_support(theta_copy))},
                   {"kkt_residual", stage1.kkt_residual},
                   {"converged", stage1.converged}};
  out["beta"] = to_json(stage3.beta);
  out["beta_support"] = to_json(stage3.support);
  out["stage3"] = stage3_json;
  out["stage3"]["kkt_residual"] = stage3.kkt_residual;
  out["stage3"]["converged"] = stage3.converged;
  out["post_lasso"] = {{"beta", to_json(refit.beta_tilde)}, {"se", to_json(refit.se)}};
  out["g_hat"] = to_json(g_hat.g_at_sample);
  out["g_tilde"] = to_json(g_tilde.g_at_sample);
  out["diagnostics"] = diag;
  emit(out, c.output);
  return 0;
}

int cmd_simulate(const CommonOpts& c, SimConfig cfg) {
  cfg.seed = c.seed;
  const SimReport report = run_simulation(cfg);
  std::cout << compare_table(report.cells);

  json out;
  out["config"] = {{"n", cfg.n},           {"d", cfg.d},
                   {"p", cfg.p},           {"k1", cfg.k1},
                   {"k2", cfg.k2},         {"rho", cfg.rho},
                   {"sigma2", cfg.sigma2}, {"n_reps", cfg.n_reps},
                   {"seed", cfg.seed},     {"experiments", cfg.experiments},
                   {"lambda1_scale", cfg.lambda1_scale},
                   {"lambda3_scale", cfg.lambda3_scale},
                   {"L", cfg.L},           {"demean", cfg.demean_stage3}};
  json cells = json::array();
  for (const ExperimentCell& cell : report.cells) {
    json jc = {{"experiment", cell.experiment},
               {"rho", cell.rho},
               {"sigma2", cell.sigma2},
               {"n", cell.n},
               {"a", cell.a},
               {"b", cell.b},
               {"d", cell.d_metric},
               {"f", cell.f},
               {"g", cell.g},
               {"n_failed", cell.n_failed},
               {"n_reps", cell.n_reps},
               {"flagged", cell.flagged}};
    if (std::isnan(cell.c)) jc["c"] = nullptr; else jc["c"] = cell.c;
    if (std::isnan(cell.e)) jc["e"] = nullptr; else jc["e"] = cell.e;
    json l2 = json::array();
    for (const RepRecord& rec : cell.records)
      l2.push_back(rec.failed ? json(nullptr) : json(rec.l2_error));
    jc["l2_errors"] = l2;
    cells.push_back(jc);
  }
  out["cells"] = cells;
  if (!c.output.empty()) emit(out, c.output);
  return 0;
}

int cmd_dantzig(const CommonOpts& c, double lambda1, double L, double xi, double C,
                bool logit_link) {
  json out;
  SelectionDataset ds = load(c, out);

  const GlmFamily family = logit_link ? GlmFamily::logit() : GlmFamily::probit();
  if (lambda1 <= 0.0) lambda1 = default_lambda1(ds.n(), ds.d());
  const GlmFit stage1 = fit_l1_glm(ds.w, ds.y1, lambda1, family);
  const ResidualBundle bundle = residualize(ds, stage1.theta, L);

  const auto [v_star, d_diag] = scaling_matrix(ds.x, bundle.v);
  if (xi <= 0.0)
    xi = default_xi(ds.p(), ds.n_selected(), 0.0, 0.0, L, 0.0, 0.0, v_star.minCoeff());
  DantzigOptions opts;
  opts.C = C;
  const DantzigSolution sol = solve_pivotal(bundle.v0, bundle.v, xi, v_star, opts);

  Vector beta_copy = sol.beta;
  const IndexSet supp = extract_support(beta_copy);
  const double kappa = l2_sensitivity_bound(bundle.v, v_star, supp, 3.0, 200, c.seed);
  out["config"] = {{"lambda1", lambda1}, {"L", L}, {"xi", xi}, {"C", C},
                   {"seed", c.seed},     {"link", logit_link ? "logit" : "probit"}};
  out["beta"] = to_json(sol.beta);
  out["sigma"] = sol.sigma;
  out["objective"] = sol.objective;
  out["slack_inf"] = sol.slack_inf;
  out["slack_l2"] = sol.slack_l2;
  out["kappa_bound"] = kappa;
  if (xi * xi < kappa) {
    const PivotalCI ci = confidence_intervals(sol, kappa, 2, L, 0.0, 0.0);
    out["ci"] = {{"halfwidth_l2", ci.halfwidth_l2},
                 {"halfwidth_coord", to_json(ci.halfwidth_coord)},
                 {"bounded", ci.bounded}};
  }
  emit(out, c.output);
  return 0;
}

int cmd_heckman(const CommonOpts& c, int n_boot) {
  json out;
  SelectionDataset ds = load(c, out);
  const HeckmanFit fit = heckman_two_step(ds, n_boot, c.seed);
  out["config"] = {{"bootstrap", n_boot}, {"seed", c.seed}};
  out["theta_probit"] = to_json(fit.theta_probit);
  out["beta"] = to_json(fit.beta);
  out["mills_coef"] = fit.mills_coef;
  out["se"] = to_json(fit.se);
  emit(out, c.output);
  return 0;
}

int cmd_cv_lipschitz(const CommonOpts& c, double lambda1, double L0, double split,
                     int max_doublings, bool logit_link) {
  json out;
  SelectionDataset ds = load(c, out);
  const GlmFamily family = logit_link ? GlmFamily::logit() : GlmFamily::probit();
  if (lambda1 <= 0.0) lambda1 = default_lambda1(ds.n(), ds.d());
  const GlmFit stage1 = fit_l1_glm(ds.w, ds.y1, lambda1, family);
  Vector index(ds.n_selected());
  for (Index i = 0; i < ds.n_selected(); ++i)
    index[i] = ds.w.row(ds.selected_rows[i]).dot(stage1.theta);
  const double L = cross_validate_L(index, ds.y2, L0, split, max_doublings, c.seed);
  out["config"] = {{"lambda1", lambda1}, {"L0", L0}, {"split", split},
                   {"max_doublings", max_doublings}, {"seed", c.seed}};
  out["L"] = L;
  emit(out, c.output);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stage estimation for high-dimensional sample-selection models"};
  app.require_subcommand(1);

  CommonOpts fit_c, dz_c, hk_c, cv_c, sim_c;
  double lambda1 = 0.0, lambda3 = 0.0, L = 1.0, xi = 0.0, C = 1.0;
  double L0 = 1.0, split = 0.7;
  int n_boot = 200, max_doublings = 20;
  bool iterate_l3 = false, cv_L = false, no_demean = false, logit_link = false;

  auto* fit = app.add_subcommand("fit", "run the full multi-stage pipeline");
  add_common(fit, fit_c);
  fit->add_option("--lambda1", lambda1, "first-stage penalty (default: rate rule)");
  fit->add_option("--lambda3", lambda3, "third-stage penalty (default: rate rule)");
  fit->add_flag("--iterate-lambda3", iterate_l3, "data-driven third-stage penalty");
  fit->add_option("--lipschitz-L", L, "Lipschitz constant for the second stage");
  fit->add_flag("--cv-L", cv_L, "cross-validate the Lipschitz constant");
  fit->add_option("--bootstrap", n_boot, "bootstrap replications for the refit SEs");
  fit->add_flag("--no-demean", no_demean, "skip demeaning before the sparse stage");
  fit->add_flag("--logit", logit_link, "logit first stage (default probit)");

  SimConfig sim;
  std::vector<int> experiments = {1, 2, 3, 4};
  auto* simulate = app.add_subcommand("simulate", "run the simulation study");
  add_common(simulate, sim_c, /*input_required=*/false);
  simulate->add_option("--n", sim.n, "observations per replication");
  simulate->add_option("--rho", sim.rho, "error correlation parameter");
  simulate->add_option("--sigma2", sim.sigma2, "outcome error scale");
  simulate->add_option("--reps", sim.n_reps, "number of replications");
  simulate->add_option("--experiments", experiments, "subset of experiments 1..4");
  simulate->add_option("--lipschitz-L", sim.L, "Lipschitz constant for the second stage");
  simulate->add_flag("--logit", logit_link, "logit first stage (default probit)");

  auto* dantzig = app.add_subcommand("dantzig", "pivotal third stage on CSV data");
  add_common(dantzig, dz_c);
  dantzig->add_option("--lambda1", lambda1, "first-stage penalty (default: rate rule)");
  dantzig->add_option("--lipschitz-L", L, "Lipschitz constant for the second stage");
  dantzig->add_option("--xi", xi, "pivotal tuning parameter (default: rate rule)");
  dantzig->add_option("--C", C, "objective weight on the noise level");
  dantzig->add_flag("--logit", logit_link, "logit first stage (default probit)");

  auto* heckman = app.add_subcommand("heckman", "classical two-step estimator");
  add_common(heckman, hk_c);
  heckman->add_option("--bootstrap", n_boot, "bootstrap replications for SEs");

  auto* cvl = app.add_subcommand("cv-lipschitz", "cross-validate the Lipschitz constant");
  add_common(cvl, cv_c);
  cvl->add_option("--lambda1", lambda1, "first-stage penalty (default: rate rule)");
  cvl->add_option("--L0", L0, "initial Lipschitz cap");
  cvl->add_option("--split", split, "training fraction");
  cvl->add_option("--max-doublings", max_doublings, "cap doublings");
  cvl->add_flag("--logit", logit_link, "logit first stage (default probit)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (fit->parsed())
      return cmd_fit(fit_c, lambda1, lambda3, iterate_l3, L, cv_L, max_doublings,
                     n_boot, !no_demean, logit_link);
    if (simulate->parsed()) {
      sim.experiments = experiments;
      sim.family = logit_link ? GlmKind::logit : GlmKind::probit;
      return cmd_simulate(sim_c, sim);
    }
    if (dantzig->parsed()) return cmd_dantzig(dz_c, lambda1, L, xi, C, logit_link);
    if (heckman->parsed()) return cmd_heckman(hk_c, n_boot);
    if (cvl->parsed())
      return cmd_cv_lipschitz(cv_c, lambda1, L0, split, max_doublings, logit_link);
  } catch (const std::invalid_argument& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 2;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return 3;
  }
  return 2;
}
