#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "panelcausal/panel.hpp"
#include "panelcausal/regress.hpp"

namespace panelcausal {

/// How treated countries are scheduled.
///  - staggered:   absorbing adoption at a country-specific onset year;
///  - common_year: every treated country enters crisis in the same middle
///                 year and stays for a country-specific duration;
///  - recurrent:   crises every `cycle_years` at a country-specific phase.
enum class Staggering { common_year, staggered, recurrent };

/// Deliberate departures from the identifying assumptions.
///  - pretrend_dip:          untreated outcome drops by dip_size * noise_sd the
///                           year before each treatment episode starts;
///  - confounded_assignment: treated countries are in crisis exactly when their
///                           untreated-outcome shock falls below -noise_sd.
enum class Violation { none, pretrend_dip, confounded_assignment };

std::string_view to_string(Staggering s);
std::string_view to_string(Violation v);
Staggering parse_staggering(std::string_view token);
Violation parse_violation(std::string_view token);

struct SynthConfig {
  int n_countries = 50;
  int n_years = 20;
  double tau = -0.05;
  double noise_sd = 0.02;
  double treated_share = 0.5;
  Staggering staggering = Staggering::staggered;
  Violation violation = Violation::none;
  int n_confounders = 2;
  int start_year = 1990;
  int horizon = 2;
  int cycle_years = 5;
  /// Dip magnitude in units of noise_sd.
  double dip_size = 5.0;
  /// Standard deviation of country-specific effects around tau; 0 = homogeneous.
  double tau_sd = 0.0;

  /// Throws ConfigError on contradictory or out-of-range settings.
  void validate() const;
};

/// Sets one field from its key-value name; throws ConfigError on unknown keys or bad values.
void apply_synth_setting(SynthConfig& config, std::string_view key, std::string_view value);

/// Reads `key = value` lines ('#' starts a comment) on top of `base`.
SynthConfig load_synth_config(const std::filesystem::path& path, SynthConfig base = {});

struct SyntheticTruth {
  double tau_true = 0.0;
  std::vector<std::string> countries;
  std::vector<int> years;  // latent years; each has an observed response
  Eigen::VectorXd gamma_country;
  Eigen::VectorXd gamma_year;
  Eigen::VectorXd beta_true;
  Eigen::VectorXd tau_country;
  /// Country-major cells (countries x years).
  std::vector<RowKey> rows;
  Eigen::VectorXd y0;
  Eigen::VectorXd y1;
  Eigen::VectorXd treatment;
  Eigen::VectorXd observed;
  double noise_sd = 0.0;
  /// Treated years per country.
  std::vector<std::vector<int>> assignment;
};

struct SyntheticPanel {
  PanelDataset panel;
  CrisisCatalog crises;
  SyntheticTruth truth;
  std::vector<std::string> confounder_names;
};

SyntheticPanel generate_panel(const SynthConfig& config, std::uint64_t seed);

/// forward fill -> min-max scale -> design -> two-way OLS on a synthetic panel.
FitResult fit_synthetic_twfe(const SyntheticPanel& data, SeMode se_mode = SeMode::classical,
                             double ci_level = 0.95);

struct RecoverySummary {
  int reps = 0;
  int failures = 0;
  double tau_true = 0.0;
  double mean_tau_hat = 0.0;
  double sd_tau_hat = 0.0;
  double ci_coverage_95 = 0.0;
  double mean_bias = 0.0;
  /// sd_tau_hat / sqrt(successful reps).
  double mc_standard_error = 0.0;
  std::vector<double> tau_hats;
  std::vector<std::string> failure_messages;
};

/// Seed of replication `rep` derived from the master seed.
std::uint64_t replication_seed(std::uint64_t master, int rep);

RecoverySummary monte_carlo_recovery(const SynthConfig& config, int reps, std::uint64_t seed);

void write_truth_json(const SyntheticTruth& truth, const std::filesystem::path& path);
void write_recovery_json(const RecoverySummary& summary, const std::filesystem::path& path);

}  // namespace panelcausal
