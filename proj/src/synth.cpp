#include "panelcausal/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "panelcausal/did.hpp"
#include "json.hpp"
#include "log.hpp"
#include "panelcausal/error.hpp"
#include "strings.hpp"

namespace panelcausal {

std::string_view to_string(Staggering s) {
  switch (s) {
    case Staggering::common_year: return "common_year";
    case Staggering::staggered: return "staggered";
    case Staggering::recurrent: return "recurrent";
  }
  return "staggered";
}

std::string_view to_string(Violation v) {
  switch (v) {
    case Violation::none: return "none";
    case Violation::pretrend_dip: return "pretrend_dip";
    case Violation::confounded_assignment: return "confounded_assignment";
  }
  return "none";
}

Staggering parse_staggering(std::string_view token) {
  const auto t = detail::lower(detail::trim(token));
  for (auto s : {Staggering::common_year, Staggering::staggered, Staggering::recurrent}) {
    if (t == to_string(s)) return s;
  }
  throw ConfigError(fmt::format("unknown staggering '{}' (expected common_year, staggered or recurrent)", token));
}

Violation parse_violation(std::string_view token) {
  const auto t = detail::lower(detail::trim(token));
  for (auto v : {Violation::none, Violation::pretrend_dip, Violation::confounded_assignment}) {
    if (t == to_string(v)) return v;
  }
  throw ConfigError(
      fmt::format("unknown violation '{}' (expected none, pretrend_dip or confounded_assignment)", token));
}

void SynthConfig::validate() const {
  if (n_countries < 2) throw ConfigError(fmt::format("n_countries must be >= 2, got {}", n_countries));
  if (n_years < 3) throw ConfigError(fmt::format("n_years must be >= 3, got {}", n_years));
  if (!(treated_share > 0.0 && treated_share < 1.0)) {
    throw ConfigError(fmt::format("treated_share must lie strictly between 0 and 1 for {} assignment, got {}",
                                  to_string(staggering), treated_share));
  }
  if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd must be >= 0");
  if (!(tau_sd >= 0.0)) throw ConfigError("tau_sd must be >= 0");
  if (n_confounders < 0) throw ConfigError("n_confounders must be >= 0");
  if (horizon < 1) throw ConfigError("horizon must be >= 1");
  if (cycle_years < 1) throw ConfigError("cycle_years must be >= 1");
  if (violation == Violation::confounded_assignment && noise_sd == 0.0) {
    throw ConfigError("confounded_assignment selects on outcome shocks and needs noise_sd > 0");
  }
}

void apply_synth_setting(SynthConfig& config, std::string_view key, std::string_view value) {
  auto as_int = [&] {
    auto v = detail::parse_int(value);
    if (!v) throw ConfigError(fmt::format("'{}' expects an integer, got '{}'", key, value));
    return *v;
  };
  auto as_real = [&] {
    auto v = detail::parse_real(value);
    if (!v) throw ConfigError(fmt::format("'{}' expects a number, got '{}'", key, value));
    return *v;
  };
  if (key == "n_countries") config.n_countries = as_int();
  else if (key == "n_years") config.n_years = as_int();
  else if (key == "tau") config.tau = as_real();
  else if (key == "noise_sd") config.noise_sd = as_real();
  else if (key == "treated_share") config.treated_share = as_real();
  else if (key == "staggering") config.staggering = parse_staggering(value);
  else if (key == "violation") config.violation = parse_violation(value);
  else if (key == "n_confounders") config.n_confounders = as_int();
  else if (key == "start_year") config.start_year = as_int();
  else if (key == "horizon") config.horizon = as_int();
  else if (key == "cycle_years") config.cycle_years = as_int();
  else if (key == "dip_size") config.dip_size = as_real();
  else if (key == "tau_sd") config.tau_sd = as_real();
  else throw ConfigError(fmt::format("unknown synthetic setting '{}'", key));
}

SynthConfig load_synth_config(const std::filesystem::path& path, SynthConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = detail::trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(fmt::format("{}:{}: expected 'key = value'", path.string(), line_no));
    }
    apply_synth_setting(base, detail::trim(view.substr(0, eq)), detail::trim(view.substr(eq + 1)));
  }
  return base;
}

namespace {

int uniform_int(std::mt19937_64& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace

SyntheticPanel generate_panel(const SynthConfig& config, std::uint64_t seed) {
  config.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int nc = config.n_countries;
  const int nt = config.n_years;
  const int total_years = nt + config.horizon;
  const int k = config.n_confounders;

  SyntheticPanel out;
  auto& truth = out.truth;
  truth.tau_true = config.tau;
  truth.noise_sd = config.noise_sd;
  const int width = static_cast<int>(std::to_string(nc).size());
  for (int c = 0; c < nc; ++c) truth.countries.push_back(fmt::format("C{:0{}}", c + 1, width));
  for (int t = 0; t < nt; ++t) truth.years.push_back(config.start_year + t);

  truth.gamma_country.resize(nc);
  for (int c = 0; c < nc; ++c) truth.gamma_country[c] = 0.02 * normal(rng);
  truth.gamma_year.resize(nt);
  for (int t = 0; t < nt; ++t) truth.gamma_year[t] = 0.04 + 0.02 * normal(rng);
  truth.beta_true.resize(k);
  for (int j = 0; j < k; ++j) truth.beta_true[j] = 0.1 * (unit(rng) - 0.5);
  truth.tau_country.resize(nc);
  for (int c = 0; c < nc; ++c) truth.tau_country[c] = config.tau + config.tau_sd * normal(rng);

  // Confounders for every panel year, including the tail that only feeds GDP.
  std::vector<double> x(static_cast<std::size_t>(nc) * total_years * k);
  for (auto& v : x) v = unit(rng);
  auto xval = [&](int c, int t, int j) -> double& {
    return x[(static_cast<std::size_t>(c) * total_years + t) * k + j];
  };
  std::vector<double> shock(static_cast<std::size_t>(nc) * nt);
  for (auto& e : shock) e = config.noise_sd * normal(rng);
  auto eps = [&](int c, int t) { return shock[static_cast<std::size_t>(c) * nt + t]; };

  // Which countries are ever treated.
  const int n_treated =
      std::clamp(static_cast<int>(std::lround(config.treated_share * nc)), 1, nc - 1);
  std::vector<int> order(nc);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> ever(nc, false);
  for (int i = 0; i < n_treated; ++i) ever[order[i]] = true;

  std::vector<std::vector<bool>> d(nc, std::vector<bool>(nt, false));
  const int wave = nt / 2;
  for (int c = 0; c < nc; ++c) {
    if (!ever[c]) continue;
    if (config.violation == Violation::confounded_assignment) {
      for (int t = 0; t < nt; ++t) d[c][t] = eps(c, t) < -config.noise_sd;
      continue;
    }
    switch (config.staggering) {
      case Staggering::staggered: {
        const int onset = uniform_int(rng, 1, nt - 1);
        for (int t = onset; t < nt; ++t) d[c][t] = true;
        break;
      }
      case Staggering::common_year: {
        const int duration = uniform_int(rng, 1, nt - wave);
        for (int t = wave; t < wave + duration; ++t) d[c][t] = true;
        break;
      }
      case Staggering::recurrent: {
        const int phase = uniform_int(rng, 0, config.cycle_years - 1);
        for (int t = phase; t < nt; t += config.cycle_years) d[c][t] = true;
        break;
      }
    }
  }

  const double dip = config.violation == Violation::pretrend_dip ? config.dip_size * config.noise_sd : 0.0;
  const auto cells = static_cast<Eigen::Index>(nc) * nt;
  truth.y0.resize(cells);
  truth.y1.resize(cells);
  truth.treatment.resize(cells);
  truth.observed.resize(cells);
  truth.assignment.assign(nc, {});
  for (int c = 0; c < nc; ++c) {
    for (int t = 0; t < nt; ++t) {
      const auto i = static_cast<Eigen::Index>(c) * nt + t;
      double y0 = truth.gamma_country[c] + truth.gamma_year[t] + eps(c, t);
      for (int j = 0; j < k; ++j) y0 += truth.beta_true[j] * xval(c, t, j);
      if (dip != 0.0 && !d[c][t] && t + 1 < nt && d[c][t + 1]) y0 -= dip;
      truth.rows.push_back({truth.countries[c], truth.years[t]});
      truth.y0[i] = y0;
      truth.y1[i] = y0 + truth.tau_country[c];
      truth.treatment[i] = d[c][t] ? 1.0 : 0.0;
      truth.observed[i] = d[c][t] ? truth.y1[i] : truth.y0[i];
      if (d[c][t]) truth.assignment[c].push_back(truth.years[t]);
    }
  }

  // GDP levels: a base of 100 for the first `horizon` years, then
  // GDP[t + h] = GDP[t] * (1 + Y[t]).
  std::vector<std::string> vars{"GDP"};
  for (int j = 0; j < k; ++j) out.confounder_names.push_back(fmt::format("X{}", j + 1));
  vars.insert(vars.end(), out.confounder_names.begin(), out.confounder_names.end());
  std::vector<int> panel_years;
  for (int t = 0; t < total_years; ++t) panel_years.push_back(config.start_year + t);
  out.panel = PanelDataset(truth.countries, panel_years, vars);
  for (int c = 0; c < nc; ++c) {
    std::vector<double> gdp(static_cast<std::size_t>(total_years), 100.0);
    for (int t = 0; t < nt; ++t) {
      const double growth = truth.observed[static_cast<Eigen::Index>(c) * nt + t];
      if (!(growth > -1.0)) {
        throw ConfigError(fmt::format("generated growth {} at ({}, {}) is below -100%", growth,
                                      truth.countries[c], truth.years[t]));
      }
      gdp[static_cast<std::size_t>(t + config.horizon)] = gdp[static_cast<std::size_t>(t)] * (1.0 + growth);
    }
    for (int t = 0; t < total_years; ++t) {
      out.panel.set_value(c, t, 0, gdp[static_cast<std::size_t>(t)]);
      for (int j = 0; j < k; ++j) out.panel.set_value(c, t, static_cast<std::size_t>(j + 1), xval(c, t, j));
    }
  }

  constexpr CrisisKind kinds[] = {CrisisKind::banking, CrisisKind::currency, CrisisKind::sovereign,
                                  CrisisKind::restructuring};
  for (int c = 0; c < nc; ++c) {
    for (int year : truth.assignment[c]) out.crises.add({truth.countries[c], year, kinds[uniform_int(rng, 0, 3)]});
  }
  return out;
}

FitResult fit_synthetic_twfe(const SyntheticPanel& data, SeMode se_mode, double ci_level) {
  const auto filled = forward_fill(data.panel);
  const auto scaled = minmax_scale(filled, data.confounder_names);
  const int horizon = static_cast<int>(data.panel.n_years() - data.truth.years.size());
  const auto dm = build_design(scaled, data.crises, data.confounder_names, horizon);
  return twfe_ols(encode_fixed_effects(dm), se_mode, ci_level);
}

std::uint64_t replication_seed(std::uint64_t master, int rep) {
  // splitmix64 finalizer over (master, rep)
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (static_cast<std::uint64_t>(rep) + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RecoverySummary monte_carlo_recovery(const SynthConfig& config, int reps, std::uint64_t seed) {
  if (reps < 2) throw ConfigError(fmt::format("monte carlo needs at least 2 replications, got {}", reps));
  config.validate();
  RecoverySummary s;
  s.reps = reps;
  s.tau_true = config.tau;
  int covered = 0;
  for (int rep = 0; rep < reps; ++rep) {
    try {
      const auto data = generate_panel(config, replication_seed(seed, rep));
      const auto fit = fit_synthetic_twfe(data);
      const auto j = fit.index_of(kTreatmentName);
      const double tau_hat = fit.coefficients[j];
      const auto [lo, hi] = fit.confidence_intervals[static_cast<std::size_t>(j)];
      s.tau_hats.push_back(tau_hat);
      if (lo <= config.tau && config.tau <= hi) ++covered;
    } catch (const Error& e) {
      ++s.failures;
      s.failure_messages.push_back(fmt::format("replication {}: {}", rep, e.what()));
    }
  }
  if (s.failures * 10 > reps) {
    throw HarnessError(fmt::format("{} of {} replications failed to fit; first: {}", s.failures, reps,
                                   s.failure_messages.front()));
  }
  const auto m = static_cast<double>(s.tau_hats.size());
  s.mean_tau_hat = std::accumulate(s.tau_hats.begin(), s.tau_hats.end(), 0.0) / m;
  double ss = 0.0;
  for (double t : s.tau_hats) ss += (t - s.mean_tau_hat) * (t - s.mean_tau_hat);
  s.sd_tau_hat = s.tau_hats.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
  s.ci_coverage_95 = static_cast<double>(covered) / m;
  s.mean_bias = s.mean_tau_hat - config.tau;
  s.mc_standard_error = s.sd_tau_hat / std::sqrt(m);
  return s;
}

namespace {

template <class Vec>
nlohmann::ordered_json to_json_array(const Vec& v) {
  auto arr = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

void write_json(const nlohmann::ordered_json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << doc.dump(2) << '\n';
}

}  // namespace

void write_truth_json(const SyntheticTruth& truth, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["tau_true"] = truth.tau_true;
  doc["noise_sd"] = truth.noise_sd;
  doc["countries"] = truth.countries;
  doc["years"] = truth.years;
  doc["gamma_country"] = to_json_array(truth.gamma_country);
  doc["gamma_year"] = to_json_array(truth.gamma_year);
  doc["beta_true"] = to_json_array(truth.beta_true);
  doc["tau_country"] = to_json_array(truth.tau_country);
  auto& assignment = doc["assignment"] = nlohmann::ordered_json::object();
  for (std::size_t c = 0; c < truth.countries.size(); ++c) assignment[truth.countries[c]] = truth.assignment[c];
  auto& cells = doc["cells"] = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < truth.rows.size(); ++i) {
    const auto e = static_cast<Eigen::Index>(i);
    cells.push_back({{"country", truth.rows[i].country},
                     {"year", truth.rows[i].year},
                     {"treated", truth.treatment[e] != 0.0},
                     {"y0", truth.y0[e]},
                     {"y1", truth.y1[e]},
                     {"observed", truth.observed[e]}});
  }
  write_json(doc, path);
}

void write_recovery_json(const RecoverySummary& s, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["reps"] = s.reps;
  doc["failures"] = s.failures;
  doc["tau_true"] = s.tau_true;
  doc["mean_tau_hat"] = s.mean_tau_hat;
  doc["sd_tau_hat"] = s.sd_tau_hat;
  doc["mean_bias"] = s.mean_bias;
  doc["mc_standard_error"] = s.mc_standard_error;
  doc["ci_coverage_95"] = s.ci_coverage_95;
  doc["failure_messages"] = s.failure_messages;
  write_json(doc, path);
}

}  // namespace panelcausal
