#include "panelcausal/did.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>

#include <boost/math/distributions/fisher_f.hpp>
#include <fmt/format.h>
#include "json.hpp"

#include "log.hpp"
#include "panelcausal/error.hpp"
#include "panelcausal/heatmap.hpp"

namespace panelcausal {

FixedEffectsDesign encode_fixed_effects(const DesignMatrix& dm, const ReferenceLevels& refs) {
  std::set<std::string> country_set;
  std::set<int> year_set;
  for (const auto& r : dm.rows) {
    country_set.insert(r.country);
    year_set.insert(r.year);
  }
  if (country_set.size() < 2 || year_set.size() < 2) {
    throw FixedEffectsDegenerateError(fmt::format(
        "two-way fixed effects need at least 2 countries and 2 years (got {} and {})", country_set.size(),
        year_set.size()));
  }

  FixedEffectsDesign fe;
  fe.base = dm;
  fe.reference_country = refs.country.value_or(*country_set.begin());
  fe.reference_year = refs.year.value_or(*year_set.begin());
  if (!country_set.contains(fe.reference_country)) {
    throw ConfigError(fmt::format("reference country '{}' is not in the design", fe.reference_country));
  }
  if (!year_set.contains(fe.reference_year)) {
    throw ConfigError(fmt::format("reference year {} is not in the design", fe.reference_year));
  }

  std::map<std::string, Eigen::Index> country_col;
  for (const auto& c : country_set) {
    if (c == fe.reference_country) continue;
    country_col[c] = static_cast<Eigen::Index>(fe.country_dummy_names.size());
    fe.country_dummy_names.push_back("I_" + c);
  }
  std::map<int, Eigen::Index> year_col;
  for (int y : year_set) {
    if (y == fe.reference_year) continue;
    year_col[y] = static_cast<Eigen::Index>(fe.year_dummy_names.size());
    fe.year_dummy_names.push_back(fmt::format("I_{}", y));
  }

  const auto n = static_cast<Eigen::Index>(dm.rows.size());
  fe.country_dummies = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(fe.country_dummy_names.size()));
  fe.year_dummies = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(fe.year_dummy_names.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = dm.rows[static_cast<std::size_t>(i)];
    if (auto it = country_col.find(r.country); it != country_col.end()) fe.country_dummies(i, it->second) = 1.0;
    if (auto it = year_col.find(r.year); it != year_col.end()) fe.year_dummies(i, it->second) = 1.0;
  }
  return fe;
}

LinearDesign twfe_linear_design(const FixedEffectsDesign& fe) {
  LinearDesign d = to_linear_design(fe.base);
  const auto n = d.n_rows();
  const auto k = d.regressors.cols();
  const auto cc = fe.country_dummies.cols();
  const auto yc = fe.year_dummies.cols();
  Eigen::MatrixXd x(n, k + cc + yc);
  x << d.regressors, fe.country_dummies, fe.year_dummies;
  d.regressors = std::move(x);
  d.names.insert(d.names.end(), fe.country_dummy_names.begin(), fe.country_dummy_names.end());
  d.names.insert(d.names.end(), fe.year_dummy_names.begin(), fe.year_dummy_names.end());
  return d;
}

FitResult twfe_ols(const FixedEffectsDesign& fe, SeMode se_mode, double ci_level) {
  return ols_fit(twfe_linear_design(fe), se_mode, ci_level);
}

LassoFit twfe_lasso(const FixedEffectsDesign& fe, double lambda, const LassoOptions& options) {
  return lasso_fit(twfe_linear_design(fe), lambda, options);
}

std::variant<FitResult, LassoFit> twfe_fit(const FixedEffectsDesign& fe, std::optional<double> penalty,
                                           SeMode se_mode) {
  if (penalty) return twfe_lasso(fe, *penalty);
  return twfe_ols(fe, se_mode);
}

Eigen::VectorXd treatment_residuals(const FixedEffectsDesign& fe) {
  LinearDesign d;
  d.rows = fe.base.rows;
  d.response = fe.base.treatment;
  d.has_intercept = true;
  d.regressors.resize(d.response.size(), fe.country_dummies.cols() + fe.year_dummies.cols());
  d.regressors << fe.country_dummies, fe.year_dummies;
  d.names = fe.country_dummy_names;
  d.names.insert(d.names.end(), fe.year_dummy_names.begin(), fe.year_dummy_names.end());
  return ols_fit(d).residuals;
}

// ---------------------------------------------------------------------------
// Weights

std::size_t WeightDecomposition::negative_count() const {
  return static_cast<std::size_t>((normalized_weights.array() < 0.0).count());
}

double WeightDecomposition::negative_mass() const {
  return normalized_weights.array().min(0.0).sum();
}

double WeightDecomposition::weighted_estimate(const Eigen::VectorXd& y) const {
  if (y.size() != epsilon.size()) throw SchemaError("outcome vector does not match the decomposition rows");
  return epsilon.dot(y) / eps_dot_treatment;
}

WeightDecomposition weight_decomposition(const Eigen::VectorXd& epsilon, const Eigen::VectorXd& treatment,
                                         std::vector<RowKey> rows) {
  if (epsilon.size() != treatment.size()) {
    throw SchemaError(fmt::format("residual vector has {} rows but treatment has {}", epsilon.size(),
                                  treatment.size()));
  }
  if (!rows.empty() && rows.size() != static_cast<std::size_t>(epsilon.size())) {
    throw SchemaError("row keys do not match the residual vector");
  }
  WeightDecomposition wd;
  wd.rows = std::move(rows);
  wd.treatment = treatment;
  wd.epsilon = epsilon;
  wd.contributions = epsilon;
  const double sum_d = treatment.sum();
  wd.total_treated = static_cast<std::size_t>(std::lround(sum_d));
  wd.eps_dot_treatment = epsilon.dot(treatment);
  if (!(std::abs(wd.eps_dot_treatment) > 1e-12 * std::max(1.0, sum_d))) {
    throw DegenerateDecompositionError(fmt::format(
        "degenerate decomposition: sum of residual times treatment is {} over {} treated rows; weights undefined",
        wd.eps_dot_treatment, wd.total_treated));
  }
  for (Eigen::Index i = 0; i < treatment.size(); ++i) {
    if (treatment[i] != 0.0) wd.treated_rows.push_back(i);
  }
  const auto m = static_cast<Eigen::Index>(wd.treated_rows.size());
  wd.weights.resize(m);
  wd.normalized_weights.resize(m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const double eps = epsilon[wd.treated_rows[static_cast<std::size_t>(k)]];
    wd.weights[k] = eps * sum_d / wd.eps_dot_treatment;
    wd.normalized_weights[k] = wd.weights[k] / sum_d;
  }
  if (wd.negative_count() > 0) {
    detail::log().info("{} of {} treated rows carry negative weight", wd.negative_count(), m);
  }
  return wd;
}

// ---------------------------------------------------------------------------
// Contribution matrix

ContributionMatrix contribution_matrix(const Eigen::VectorXd& contributions, const std::vector<RowKey>& rows) {
  if (rows.size() != static_cast<std::size_t>(contributions.size())) {
    throw SchemaError("row keys do not match the contribution vector");
  }
  std::set<std::string> country_set;
  std::set<int> year_set;
  for (const auto& r : rows) {
    country_set.insert(r.country);
    year_set.insert(r.year);
  }
  ContributionMatrix m;
  m.countries.assign(country_set.begin(), country_set.end());
  m.years.assign(year_set.begin(), year_set.end());
  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  const auto nc = static_cast<Eigen::Index>(m.countries.size());
  const auto ny = static_cast<Eigen::Index>(m.years.size());
  m.values = Eigen::MatrixXd::Constant(nc, ny, nan);
  m.treated_weights = Eigen::MatrixXd::Constant(nc, ny, nan);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto c = std::lower_bound(m.countries.begin(), m.countries.end(), rows[i].country) - m.countries.begin();
    const auto y = std::lower_bound(m.years.begin(), m.years.end(), rows[i].year) - m.years.begin();
    const double v = contributions[static_cast<Eigen::Index>(i)];
    m.values(c, y) = v;
    m.max_abs = std::max(m.max_abs, std::abs(v));
  }
  return m;
}

ContributionMatrix contribution_matrix(const WeightDecomposition& wd) {
  auto m = contribution_matrix(wd.contributions, wd.rows);
  for (std::size_t k = 0; k < wd.treated_rows.size(); ++k) {
    const auto& r = wd.rows[static_cast<std::size_t>(wd.treated_rows[k])];
    const auto c = std::lower_bound(m.countries.begin(), m.countries.end(), r.country) - m.countries.begin();
    const auto y = std::lower_bound(m.years.begin(), m.years.end(), r.year) - m.years.begin();
    m.treated_weights(c, y) = wd.normalized_weights[static_cast<Eigen::Index>(k)];
  }
  return m;
}

void write_contribution_csv(const ContributionMatrix& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << "country";
  for (int y : m.years) out << ',' << y;
  out << '\n';
  for (std::size_t c = 0; c < m.countries.size(); ++c) {
    out << m.countries[c];
    for (std::size_t y = 0; y < m.years.size(); ++y) {
      out << ',';
      const double v = m.values(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(y));
      if (!std::isnan(v)) out << fmt::format("{}", v);
    }
    out << '\n';
  }
}

std::string contribution_svg(const ContributionMatrix& m) {
  HeatmapSpec spec;
  spec.title = "Contribution of each country-year to the treatment effect (red > 0, blue < 0)";
  spec.row_labels = m.countries;
  for (int y : m.years) spec.column_labels.push_back(std::to_string(y));
  spec.values = m.values;
  spec.max_abs = m.max_abs;
  return render_svg_heatmap(spec);
}

void write_decomposition_json(const WeightDecomposition& wd, const std::filesystem::path& path) {
  nlohmann::ordered_json doc;
  doc["total_treated"] = wd.total_treated;
  doc["sum_epsilon_times_treatment"] = wd.eps_dot_treatment;
  doc["negative_weight_count"] = wd.negative_count();
  doc["negative_weight_mass"] = wd.negative_mass();
  auto& treated = doc["treated"] = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < wd.treated_rows.size(); ++k) {
    const auto i = wd.treated_rows[k];
    nlohmann::ordered_json row;
    if (!wd.rows.empty()) {
      row["country"] = wd.rows[static_cast<std::size_t>(i)].country;
      row["year"] = wd.rows[static_cast<std::size_t>(i)].year;
    }
    row["epsilon"] = wd.epsilon[i];
    row["weight"] = wd.weights[static_cast<Eigen::Index>(k)];
    row["normalized_weight"] = wd.normalized_weights[static_cast<Eigen::Index>(k)];
    treated.push_back(std::move(row));
  }
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Lead diagnostic

PretrendDiagnostic placebo_pretrend(const FixedEffectsDesign& fe, const std::vector<int>& leads,
                                    SeMode se_mode, double ci_level) {
  PretrendDiagnostic out;
  out.label = "descriptive diagnostic only; not a formal parallel-trends test";
  out.leads = leads;
  if (leads.empty()) {
    out.fit = twfe_ols(fe, se_mode, ci_level);
    out.joint_f = out.joint_p = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
  if (fe.base.treated_count == 0 && fe.base.treatment.sum() == 0.0) {
    throw DiagnosticUnavailableError("pre-trend diagnostic unavailable: design has no treated rows");
  }

  std::map<std::pair<std::string, int>, double> treated;
  for (std::size_t i = 0; i < fe.base.rows.size(); ++i) {
    treated[{fe.base.rows[i].country, fe.base.rows[i].year}] = fe.base.treatment[static_cast<Eigen::Index>(i)];
  }
  auto lookup = [&](const std::string& c, int y) -> std::optional<double> {
    auto it = treated.find({c, y});
    if (it == treated.end()) return std::nullopt;
    return it->second;
  };

  LinearDesign d = twfe_linear_design(fe);
  const auto n = d.n_rows();
  const auto base_cols = d.regressors.cols();
  d.regressors.conservativeResize(n, base_cols + static_cast<Eigen::Index>(leads.size()));
  for (std::size_t l = 0; l < leads.size(); ++l) {
    const int k = leads[l];
    if (k < 1) throw ConfigError(fmt::format("leads must be positive integers, got {}", k));
    auto col = d.regressors.col(base_cols + static_cast<Eigen::Index>(l));
    col.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& r = fe.base.rows[static_cast<std::size_t>(i)];
      if (fe.base.treatment[i] != 0.0) continue;
      const auto ahead = lookup(r.country, r.year + k);
      if (!ahead || *ahead == 0.0) continue;
      const auto before = lookup(r.country, r.year + k - 1);
      if (before && *before != 0.0) continue;
      col[i] = 1.0;
    }
    if (col.sum() == 0.0) {
      throw DiagnosticUnavailableError(
          fmt::format("pre-trend diagnostic unavailable: no observation is {} year(s) before a treatment start", k));
    }
    out.lead_names.push_back(fmt::format("lead_{}", k));
    d.names.push_back(out.lead_names.back());
  }

  out.fit = ols_fit(d, se_mode, ci_level);

  const auto q = static_cast<Eigen::Index>(leads.size());
  Eigen::VectorXd b(q);
  Eigen::MatrixXd v(q, q);
  std::vector<Eigen::Index> idx;
  for (const auto& name : out.lead_names) idx.push_back(out.fit.index_of(name));
  for (Eigen::Index a = 0; a < q; ++a) {
    b[a] = out.fit.coefficients[idx[static_cast<std::size_t>(a)]];
    for (Eigen::Index c = 0; c < q; ++c) {
      v(a, c) = out.fit.covariance(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(c)]);
    }
  }
  out.joint_f = b.dot(v.ldlt().solve(b)) / static_cast<double>(q);
  if (std::isfinite(out.joint_f) && out.joint_f >= 0.0) {
    boost::math::fisher_f dist(static_cast<double>(q), static_cast<double>(out.fit.dof));
    out.joint_p = boost::math::cdf(boost::math::complement(dist, out.joint_f));
  } else {
    out.joint_p = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

}  // namespace panelcausal
