#include "panelcausal/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "panelcausal/did.hpp"
#include "panelcausal/error.hpp"
#include "panelcausal/heatmap.hpp"
#include "panelcausal/lasso.hpp"
#include "panelcausal/panel.hpp"
#include "panelcausal/regress.hpp"
#include "panelcausal/report.hpp"
#include "panelcausal/synth.hpp"

namespace panelcausal::cli {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kEstimators{"mlr", "mlr_lasso", "did", "did_lasso"};

bool is_did(const std::string& estimator) { return estimator == "did" || estimator == "did_lasso"; }
bool is_lasso(const std::string& estimator) { return estimator == "mlr_lasso" || estimator == "did_lasso"; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << text;
}

fs::path prepare_output_dir(const RunConfig& cfg) {
  fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ConfigError(fmt::format("cannot create output directory '{}': {}", dir.string(), ec.message()));
  return dir;
}

void check_inputs(const RunConfig& cfg, bool need_crises) {
  if (cfg.panel_path.empty()) throw ConfigError("--panel is required");
  if (!fs::exists(cfg.panel_path)) throw ConfigError(fmt::format("panel file '{}' not found", cfg.panel_path));
  if (need_crises && cfg.crisis_path.empty()) throw ConfigError("--crises is required");
  if (!cfg.crisis_path.empty() && !fs::exists(cfg.crisis_path)) {
    throw ConfigError(fmt::format("crisis file '{}' not found", cfg.crisis_path));
  }
  if (std::find(kEstimators.begin(), kEstimators.end(), cfg.estimator) == kEstimators.end()) {
    throw ConfigError(fmt::format("unknown estimator '{}'", cfg.estimator));
  }
  if (!(cfg.ci_level > 0.0 && cfg.ci_level < 1.0)) {
    throw ConfigError(fmt::format("--ci-level must lie in (0, 1), got {}", cfg.ci_level));
  }
  if (cfg.horizon < 1) throw ConfigError(fmt::format("--horizon must be >= 1, got {}", cfg.horizon));
  parse_se_mode(cfg.se_mode);
}

struct Prepared {
  PanelDataset panel;
  CrisisCatalog crises;
  DesignMatrix design;
};

/// load -> forward fill -> scale confounders -> design
Prepared prepare_design(const RunConfig& cfg) {
  Prepared p;
  const auto raw = load_panel_csv(cfg.panel_path);
  if (!cfg.crisis_path.empty()) p.crises = load_crisis_csv(cfg.crisis_path);
  std::vector<std::string> confounders = cfg.confounders;
  if (confounders.empty()) {
    for (const auto& v : raw.variable_names()) {
      if (v != "GDP") confounders.push_back(v);
    }
  }
  for (const auto& name : confounders) {
    if (!raw.variable_index(name)) throw ConfigError(fmt::format("unknown confounder '{}'", name));
  }
  p.panel = minmax_scale(forward_fill(raw), confounders);
  p.design = build_design(p.panel, p.crises, confounders, cfg.horizon);
  p.design.warnings.insert(p.design.warnings.begin(), p.panel.warnings().begin(), p.panel.warnings().end());
  return p;
}

void print_warnings(const std::vector<std::string>& warnings, std::ostream& err) {
  for (const auto& w : warnings) err << "warning: " << w << '\n';
}

std::string nonzero_table(const LassoFit& fit, const std::string& title) {
  LassoFit kept = fit;
  kept.coefficient_names.clear();
  std::vector<double> values;
  for (std::size_t j = 0; j < fit.coefficient_names.size(); ++j) {
    const double b = fit.coefficients[static_cast<Eigen::Index>(j)];
    if (b != 0.0) {
      kept.coefficient_names.push_back(fit.coefficient_names[j]);
      values.push_back(b);
    }
  }
  kept.coefficients = Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
  return to_text(kept, title);
}

// ---------------------------------------------------------------------------

int cmd_describe(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  check_inputs(cfg, false);
  const auto dir = prepare_output_dir(cfg);
  const auto ds = load_panel_csv(cfg.panel_path);
  std::string text = fmt::format("{} countries, {} years, {} rows\n\n", ds.n_countries(), ds.n_years(), ds.n_rows());
  text += fmt::format("{:<24}{:>10}{:>16}{:>16}\n", "variable", "count", "mean", "std");
  for (const auto& s : summarize_variables(ds)) {
    text += fmt::format("{:<24}{:>10}{:>16.6g}{:>16.6g}\n", s.name, s.count, s.mean, s.sd);
  }
  if (!cfg.crisis_path.empty()) {
    const auto catalog = load_crisis_csv(cfg.crisis_path);
    std::size_t unresolved = 0;
    for (const auto& e : catalog.events()) {
      if (!ds.country_index(e.country)) ++unresolved;
    }
    text += fmt::format("\ncrisis events: {}   crisis share of rows: {:.6g}\n", catalog.size(),
                        crisis_share(ds, catalog));
    if (unresolved > 0) err << "warning: " << unresolved << " crisis event(s) reference unknown countries\n";
  }
  write_text(dir / "describe.txt", text);
  out << text;
  return kSuccess;
}

int cmd_fit(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  check_inputs(cfg, true);
  const auto dir = prepare_output_dir(cfg);
  const auto se_mode = parse_se_mode(cfg.se_mode);
  if (cfg.lambda && !is_lasso(cfg.estimator)) {
    err << "warning: --lambda is ignored by the unpenalized estimator '" << cfg.estimator << "'\n";
  }
  auto prepared = prepare_design(cfg);
  const auto& dm = prepared.design;
  print_warnings(dm.warnings, err);

  nlohmann::ordered_json doc;
  doc["estimator"] = cfg.estimator;
  doc["n_rows"] = dm.n_rows();
  doc["treated_count"] = dm.treated_count;
  doc["treated_share"] = dm.treated_share;
  std::string text, significant;
  const std::string title = fmt::format("estimator: {}", cfg.estimator);

  if (!is_lasso(cfg.estimator)) {
    FitResult fit = is_did(cfg.estimator) ? twfe_ols(encode_fixed_effects(dm), se_mode, cfg.ci_level)
                                          : ols_fit(dm, se_mode, cfg.ci_level);
    doc["tau"] = fit.coefficient(kTreatmentName);
    const auto report = to_json(fit);
    for (auto& [k, v] : report.items()) doc[k] = v;
    text = to_text(fit, title);
    significant = to_text(significant_subset(fit, 1.0 - cfg.ci_level),
                          fmt::format("{} (coefficients with p < {:g})", title, 1.0 - cfg.ci_level));
  } else {
    LinearDesign design;
    if (is_did(cfg.estimator)) {
      design = twfe_linear_design(encode_fixed_effects(dm));
    } else {
      design = to_linear_design(dm);
    }
    double lambda = 0.0;
    nlohmann::ordered_json selection;
    if (cfg.lambda) {
      lambda = *cfg.lambda;
      selection = {{"method", "fixed"}};
    } else {
      const auto grid = lambda_grid(design);
      const std::span<const double> d(dm.treatment.data(), static_cast<std::size_t>(dm.treatment.size()));
      const auto cv = select_lambda_cv(design, d, grid, cfg.cv_folds, cfg.seed);
      lambda = cv.lambda_star;
      write_cv_table_csv(cv, dir / "cv_table.csv");
      selection = {{"method", "cv"},
                   {"folds", cfg.cv_folds},
                   {"seed", cfg.seed},
                   {"grid_points", grid.size()},
                   {"lambda_star", cv.lambda_star}};
    }
    const auto fit = lasso_fit(design, lambda);
    print_warnings(fit.warnings, err);
    doc["tau"] = fit.coefficient(kTreatmentName);
    const auto report = to_json(fit);
    for (auto& [k, v] : report.items()) doc[k] = v;
    doc["lambda_selection"] = selection;
    text = to_text(fit, title);
    significant = nonzero_table(fit, fmt::format("{} (nonzero coefficients)", title));
  }
  doc["warnings"] = dm.warnings;

  write_text(dir / "fit.json", doc.dump(2) + "\n");
  write_text(dir / "fit.txt", text);
  write_text(dir / "significant.txt", significant);
  out << text;
  return kSuccess;
}

int cmd_weights(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  check_inputs(cfg, true);
  if (!is_did(cfg.estimator)) {
    throw ConfigError(fmt::format("weights needs a did-family estimator, got '{}'", cfg.estimator));
  }
  const auto dir = prepare_output_dir(cfg);
  auto prepared = prepare_design(cfg);
  print_warnings(prepared.design.warnings, err);
  const auto fe = encode_fixed_effects(prepared.design);
  const auto eps = treatment_residuals(fe);
  const auto wd = weight_decomposition(eps, fe.base.treatment, fe.base.rows);
  const auto matrix = contribution_matrix(wd);

  write_contribution_csv(matrix, dir / "contributions.csv");
  write_decomposition_json(wd, dir / "weights.json");
  write_text(dir / "heatmap.svg", contribution_svg(matrix));
  out << fmt::format("treated rows: {}\nnegative weights: {}\nnegative weight mass: {:.6g}\n", wd.total_treated,
                     wd.negative_count(), wd.negative_mass());
  return kSuccess;
}

int cmd_corr(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  check_inputs(cfg, false);
  const auto dir = prepare_output_dir(cfg);
  auto prepared = prepare_design(cfg);
  print_warnings(prepared.design.warnings, err);
  const auto corr = correlation_matrix(prepared.design);
  for (const auto& name : corr.constant_columns) err << "warning: column '" << name << "' is constant\n";
  write_correlation_csv(corr, dir / "correlation.csv");

  HeatmapSpec spec;
  spec.title = "Sample correlation of the regressors";
  spec.row_labels = corr.names;
  spec.column_labels = corr.names;
  spec.values = corr.values;
  spec.max_abs = 1.0;
  write_text(dir / "correlation.svg", render_svg_heatmap(spec));
  out << fmt::format("wrote {}x{} correlation matrix\n", corr.values.rows(), corr.values.cols());
  return kSuccess;
}

struct SimulateOptions {
  std::string config_path;
  std::optional<int> countries, years, confounders, horizon, reps;
  std::optional<double> tau, noise_sd, treated_share;
  std::optional<std::string> staggering, violation;
};

int cmd_simulate(const SimulateOptions& opt, const RunConfig& cfg, std::ostream& out) {
  SynthConfig sc;
  if (!opt.config_path.empty()) sc = load_synth_config(opt.config_path);
  if (opt.countries) sc.n_countries = *opt.countries;
  if (opt.years) sc.n_years = *opt.years;
  if (opt.confounders) sc.n_confounders = *opt.confounders;
  if (opt.horizon) sc.horizon = *opt.horizon;
  if (opt.tau) sc.tau = *opt.tau;
  if (opt.noise_sd) sc.noise_sd = *opt.noise_sd;
  if (opt.treated_share) sc.treated_share = *opt.treated_share;
  if (opt.staggering) sc.staggering = parse_staggering(*opt.staggering);
  if (opt.violation) sc.violation = parse_violation(*opt.violation);
  sc.validate();
  const int reps = opt.reps.value_or(1);
  if (reps < 1) throw ConfigError("--reps must be >= 1");

  const auto dir = prepare_output_dir(cfg);
  const auto data = generate_panel(sc, cfg.seed);
  write_panel_csv(data.panel, dir / "panel.csv");
  write_crisis_csv(data.crises, dir / "crises.csv");
  write_truth_json(data.truth, dir / "truth.json");
  out << fmt::format("simulated {} countries x {} years ({} crisis events)\n", sc.n_countries, sc.n_years,
                     data.crises.size());
  if (reps > 1) {
    const auto summary = monte_carlo_recovery(sc, reps, cfg.seed);
    write_recovery_json(summary, dir / "recovery_summary.json");
    out << fmt::format("reps = {}  mean tau_hat = {:.6g}  bias = {:.3g}  sd = {:.3g}  coverage = {:.3f}\n",
                       summary.reps, summary.mean_tau_hat, summary.mean_bias, summary.sd_tau_hat,
                       summary.ci_coverage_95);
  }
  return kSuccess;
}

void add_common_options(CLI::App* cmd, RunConfig& cfg) {
  cmd->add_option("--panel", cfg.panel_path, "Panel CSV (country,year,<variables...>)");
  cmd->add_option("--crises", cfg.crisis_path, "Crisis CSV (country,year,kind)");
  cmd->add_option("--confounders", cfg.confounders, "Comma-separated confounder names")->delimiter(',');
  cmd->add_option("--horizon", cfg.horizon, "Forward growth horizon in years");
  cmd->add_option("--estimator", cfg.estimator, "mlr, mlr_lasso, did or did_lasso");
  cmd->add_option("--lambda", cfg.lambda, "Fixed lasso penalty (skips cross-validation)");
  cmd->add_option("--cv-folds", cfg.cv_folds, "Cross-validation folds");
  cmd->add_option("--seed", cfg.seed, "Random seed");
  cmd->add_option("--se", cfg.se_mode, "classical or cluster");
  cmd->add_option("--ci-level", cfg.ci_level, "Confidence level");
  cmd->add_option("--output-dir", cfg.output_dir, "Directory for every output file");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Panel difference-in-differences toolkit", "panelcausal"};
  app.require_subcommand(1);

  RunConfig cfg;
  SimulateOptions sim;
  auto* describe = app.add_subcommand("describe", "Summary statistics of a panel");
  auto* fit = app.add_subcommand("fit", "Fit a pooled or two-way fixed-effects model");
  auto* weights = app.add_subcommand("weights", "Residual weight decomposition of the two-way estimate");
  auto* corr = app.add_subcommand("corr", "Correlation matrix of the regressors");
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic panel with known effects");
  for (auto* cmd : {describe, fit, weights, corr}) add_common_options(cmd, cfg);
  weights->callback([&] {
    if (weights->count("--estimator") == 0) cfg.estimator = "did";
  });

  simulate->add_option("--config", sim.config_path, "Key-value configuration file");
  simulate->add_option("--countries", sim.countries);
  simulate->add_option("--years", sim.years);
  simulate->add_option("--n-confounders", sim.confounders);
  simulate->add_option("--horizon", sim.horizon);
  simulate->add_option("--tau", sim.tau);
  simulate->add_option("--noise-sd", sim.noise_sd);
  simulate->add_option("--treated-share", sim.treated_share);
  simulate->add_option("--staggering", sim.staggering);
  simulate->add_option("--violation", sim.violation);
  simulate->add_option("--reps", sim.reps);
  simulate->add_option("--seed", cfg.seed);
  simulate->add_option("--output-dir", cfg.output_dir);

  std::vector<std::string> reversed(args.rbegin(), args.rend() - (args.empty() ? 0 : 1));
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kSuccess;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (*describe) return cmd_describe(cfg, out, err);
    if (*fit) return cmd_fit(cfg, out, err);
    if (*weights) return cmd_weights(cfg, out, err);
    if (*corr) return cmd_corr(cfg, out, err);
    if (*simulate) return cmd_simulate(sim, cfg, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

}  // namespace panelcausal::cli
