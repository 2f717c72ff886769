#include "panelcausal/panel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>

#include "log.hpp"
#include "panelcausal/error.hpp"
#include "strings.hpp"

namespace panelcausal {

namespace detail {

spdlog::logger& log() {
  static std::shared_ptr<spdlog::logger> logger = [] {
    auto l = spdlog::stderr_color_st("panelcausal");
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("PANELCAUSAL_LOG");
    std::string level = env ? lower(env) : "off";
    if (level == "debug") {
      l->set_level(spdlog::level::debug);
    } else if (level == "info") {
      l->set_level(spdlog::level::info);
    } else {
      l->set_level(spdlog::level::off);
    }
    return l;
  }();
  return *logger;
}

}  // namespace detail

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open '{}'", path.string()));
  return in;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

}  // namespace

// ---------------------------------------------------------------------------
// PanelDataset

PanelDataset::PanelDataset(std::vector<std::string> countries, std::vector<int> years,
                           std::vector<std::string> variable_names)
    : countries_(std::move(countries)),
      years_(std::move(years)),
      variable_names_(std::move(variable_names)) {
  if (!std::is_sorted(countries_.begin(), countries_.end()) ||
      std::adjacent_find(countries_.begin(), countries_.end()) != countries_.end()) {
    throw SchemaError("countries must be unique and sorted");
  }
  if (std::adjacent_find(years_.begin(), years_.end(), std::greater_equal<>()) != years_.end()) {
    throw SchemaError("years must be strictly increasing");
  }
  std::vector<std::string> sorted = variable_names_;
  std::sort(sorted.begin(), sorted.end());
  if (auto dup = std::adjacent_find(sorted.begin(), sorted.end()); dup != sorted.end()) {
    throw SchemaError(fmt::format("duplicate variable name '{}'", *dup));
  }
  const std::size_t n = countries_.size() * years_.size() * variable_names_.size();
  values_.assign(n, kNaN);
  missing_.assign(n, true);
  present_.assign(countries_.size() * years_.size(), false);
}

std::size_t PanelDataset::n_rows() const {
  return static_cast<std::size_t>(std::count(present_.begin(), present_.end(), true));
}

std::optional<std::size_t> PanelDataset::country_index(std::string_view country) const {
  auto it = std::lower_bound(countries_.begin(), countries_.end(), country);
  if (it == countries_.end() || *it != country) return std::nullopt;
  return static_cast<std::size_t>(it - countries_.begin());
}

std::optional<std::size_t> PanelDataset::year_index(int year) const {
  auto it = std::lower_bound(years_.begin(), years_.end(), year);
  if (it == years_.end() || *it != year) return std::nullopt;
  return static_cast<std::size_t>(it - years_.begin());
}

std::optional<std::size_t> PanelDataset::variable_index(std::string_view name) const {
  auto it = std::find(variable_names_.begin(), variable_names_.end(), name);
  if (it == variable_names_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - variable_names_.begin());
}

std::size_t PanelDataset::require_variable(std::string_view name) const {
  auto idx = variable_index(name);
  if (!idx) throw SchemaError(fmt::format("unknown variable '{}'", name));
  return *idx;
}

void PanelDataset::set_present(std::size_t c, std::size_t y, bool on) {
  present_[c * years_.size() + y] = on;
  if (!on) {
    for (std::size_t v = 0; v < variable_names_.size(); ++v) {
      values_[cell(c, y, v)] = kNaN;
      missing_[cell(c, y, v)] = true;
    }
  }
}

std::optional<double> PanelDataset::value(std::size_t c, std::size_t y, std::size_t v) const {
  const auto i = cell(c, y, v);
  if (missing_[i]) return std::nullopt;
  return values_[i];
}

void PanelDataset::set_value(std::size_t c, std::size_t y, std::size_t v, double x) {
  present_[c * years_.size() + y] = true;
  const auto i = cell(c, y, v);
  if (std::isfinite(x)) {
    values_[i] = x;
    missing_[i] = false;
  } else {
    values_[i] = kNaN;
    missing_[i] = true;
  }
}

void PanelDataset::set_missing(std::size_t c, std::size_t y, std::size_t v) { set_value(c, y, v, kNaN); }

void PanelDataset::add_warning(std::string message) {
  detail::log().warn("{}", message);
  warnings_.push_back(std::move(message));
}

// ---------------------------------------------------------------------------
// Crisis catalog

std::string_view to_string(CrisisKind kind) {
  switch (kind) {
    case CrisisKind::banking: return "banking";
    case CrisisKind::currency: return "currency";
    case CrisisKind::sovereign: return "sovereign";
    case CrisisKind::restructuring: return "restructuring";
  }
  return "banking";
}

CrisisKind parse_crisis_kind(std::string_view token) {
  const std::string t = detail::lower(detail::trim(token));
  for (auto kind : {CrisisKind::banking, CrisisKind::currency, CrisisKind::sovereign,
                    CrisisKind::restructuring}) {
    if (t == to_string(kind)) return kind;
  }
  throw EnumValueError(fmt::format(
      "unknown crisis kind '{}' (expected banking, currency, sovereign or restructuring)", token));
}

void CrisisCatalog::add(CrisisEvent event) {
  const std::string desc = fmt::format("{},{},{}", event.country, event.year, to_string(event.kind));
  if (!events_.insert(std::move(event)).second) {
    throw DuplicateEventError(fmt::format("duplicate crisis event {}", desc));
  }
}

bool CrisisCatalog::contains(std::string_view country, int year) const {
  auto it = events_.lower_bound(CrisisEvent{std::string(country), year, CrisisKind::banking});
  return it != events_.end() && it->country == country && it->year == year;
}

// ---------------------------------------------------------------------------
// CSV I/O

PanelDataset load_panel_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw EmptyInputError(fmt::format("'{}' is empty", path.string()));
  line = strip_cr(std::move(line));

  const auto header = detail::split(line, ',');
  if (header.size() < 3) {
    throw SchemaError(fmt::format("header must be 'country,year,<variables...>', got '{}'", line));
  }
  if (detail::lower(detail::trim(header[0])) != "country") {
    throw SchemaError(fmt::format("header column 1 must be 'country', got '{}'", header[0]));
  }
  if (detail::lower(detail::trim(header[1])) != "year") {
    throw SchemaError(fmt::format("header column 2 must be 'year', got '{}'", header[1]));
  }
  std::vector<std::string> variables;
  for (std::size_t i = 2; i < header.size(); ++i) {
    std::string name(detail::trim(header[i]));
    if (name.empty()) throw SchemaError(fmt::format("empty variable name in header column {}", i + 1));
    if (std::find(variables.begin(), variables.end(), name) != variables.end()) {
      throw SchemaError(fmt::format("duplicate variable '{}' in header column {}", name, i + 1));
    }
    variables.push_back(std::move(name));
  }
  if (std::find(variables.begin(), variables.end(), "GDP") == variables.end()) {
    throw SchemaError("header has no 'GDP' column");
  }

  struct RawRow {
    std::string country;
    int year;
    std::vector<double> values;
  };
  std::vector<RawRow> raw;
  std::map<std::pair<std::string, int>, std::size_t> seen;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != header.size()) {
      throw SchemaError(fmt::format("line {}: expected {} fields, got {}", line_no, header.size(),
                                    fields.size()));
    }
    RawRow row;
    row.country = std::string(detail::trim(fields[0]));
    if (row.country.empty()) throw SchemaError(fmt::format("line {}: empty country", line_no));
    auto year = detail::parse_int(fields[1]);
    if (!year) throw SchemaError(fmt::format("line {}: year '{}' is not an integer", line_no, fields[1]));
    row.year = *year;
    auto [it, inserted] = seen.emplace(std::make_pair(row.country, row.year), line_no);
    if (!inserted) {
      throw DuplicateRowError(fmt::format("line {}: duplicate row ({}, {}) first seen on line {}",
                                          line_no, row.country, row.year, it->second),
                              line_no);
    }
    row.values.reserve(variables.size());
    for (std::size_t i = 2; i < fields.size(); ++i) {
      row.values.push_back(detail::parse_real(fields[i]).value_or(kNaN));
    }
    raw.push_back(std::move(row));
  }
  if (raw.empty()) throw EmptyInputError(fmt::format("'{}' has no data rows", path.string()));

  std::vector<std::string> countries;
  std::vector<int> years;
  for (const auto& r : raw) {
    countries.push_back(r.country);
    years.push_back(r.year);
  }
  std::sort(countries.begin(), countries.end());
  countries.erase(std::unique(countries.begin(), countries.end()), countries.end());
  std::sort(years.begin(), years.end());
  years.erase(std::unique(years.begin(), years.end()), years.end());

  PanelDataset ds(std::move(countries), std::move(years), std::move(variables));
  for (const auto& r : raw) {
    const auto c = *ds.country_index(r.country);
    const auto y = *ds.year_index(r.year);
    ds.set_present(c, y, true);
    for (std::size_t v = 0; v < r.values.size(); ++v) ds.set_value(c, y, v, r.values[v]);
  }
  detail::log().info("loaded panel '{}': {} rows, {} countries, {} variables", path.string(),
                     ds.n_rows(), ds.n_countries(), ds.n_variables());
  return ds;
}

CrisisCatalog load_crisis_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  std::string line;
  if (!std::getline(in, line)) throw EmptyInputError(fmt::format("'{}' is empty", path.string()));
  line = strip_cr(std::move(line));
  const auto header = detail::split(line, ',');
  const char* expected[] = {"country", "year", "kind"};
  if (header.size() != 3) {
    throw SchemaError(fmt::format("crisis header must be 'country,year,kind', got '{}'", line));
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (detail::lower(detail::trim(header[i])) != expected[i]) {
      throw SchemaError(fmt::format("crisis header column {} must be '{}', got '{}'", i + 1,
                                    expected[i], header[i]));
    }
  }
  CrisisCatalog catalog;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(std::move(line));
    if (detail::trim(line).empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 3) {
      throw SchemaError(fmt::format("line {}: expected 3 fields, got {}", line_no, fields.size()));
    }
    auto year = detail::parse_int(fields[1]);
    if (!year) throw SchemaError(fmt::format("line {}: year '{}' is not an integer", line_no, fields[1]));
    CrisisEvent event{std::string(detail::trim(fields[0])), *year, CrisisKind::banking};
    try {
      event.kind = parse_crisis_kind(fields[2]);
      catalog.add(std::move(event));
    } catch (const EnumValueError& e) {
      throw EnumValueError(fmt::format("line {}: {}", line_no, e.what()));
    } catch (const DuplicateEventError& e) {
      throw DuplicateEventError(fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  return catalog;
}

void write_panel_csv(const PanelDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << "country,year";
  for (const auto& v : ds.variable_names()) out << ',' << v;
  out << '\n';
  for (std::size_t c = 0; c < ds.n_countries(); ++c) {
    for (std::size_t y = 0; y < ds.n_years(); ++y) {
      if (!ds.present(c, y)) continue;
      out << ds.countries()[c] << ',' << ds.years()[y];
      for (std::size_t v = 0; v < ds.n_variables(); ++v) {
        out << ',';
        if (auto x = ds.value(c, y, v)) out << fmt::format("{}", *x);
      }
      out << '\n';
    }
  }
}

void write_crisis_csv(const CrisisCatalog& catalog, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << "country,year,kind\n";
  for (const auto& e : catalog.events()) out << e.country << ',' << e.year << ',' << to_string(e.kind) << '\n';
}

// ---------------------------------------------------------------------------
// Transforms

PanelDataset forward_fill(const PanelDataset& ds) {
  PanelDataset out = ds;
  for (std::size_t c = 0; c < out.n_countries(); ++c) {
    for (std::size_t v = 0; v < out.n_variables(); ++v) {
      std::optional<double> last;
      for (std::size_t y = 0; y < out.n_years(); ++y) {
        if (!out.present(c, y)) continue;
        if (auto x = out.value(c, y, v)) {
          last = x;
        } else if (last) {
          out.set_value(c, y, v, *last);
        }
      }
    }
  }
  return out;
}

namespace {

double scale_value(double x, const ScalingRecord& r) {
  if (r.constant) return 0.0;
  return (x - r.min) / (r.max - r.min);
}

}  // namespace

PanelDataset minmax_scale(const PanelDataset& ds, const std::vector<std::string>& vars) {
  std::vector<ScalingRecord> records;
  for (const auto& name : vars) {
    const auto v = ds.require_variable(name);
    ScalingRecord r{name, std::numeric_limits<double>::infinity(),
                    -std::numeric_limits<double>::infinity(), false};
    std::size_t count = 0;
    for (std::size_t c = 0; c < ds.n_countries(); ++c) {
      for (std::size_t y = 0; y < ds.n_years(); ++y) {
        if (auto x = ds.value(c, y, v)) {
          r.min = std::min(r.min, *x);
          r.max = std::max(r.max, *x);
          ++count;
        }
      }
    }
    if (count == 0) {
      r.min = r.max = 0.0;
      r.constant = true;
    } else if (r.max == r.min) {
      r.constant = true;
    }
    records.push_back(r);
  }
  PanelDataset out = apply_scaling(ds, records);
  for (const auto& r : records) {
    if (r.constant) {
      out.add_warning(fmt::format("variable '{}' is constant; scaled to 0", r.variable));
    }
  }
  return out;
}

PanelDataset apply_scaling(const PanelDataset& raw, const std::vector<ScalingRecord>& records) {
  PanelDataset out = raw;
  for (const auto& r : records) {
    const auto v = out.require_variable(r.variable);
    for (std::size_t c = 0; c < out.n_countries(); ++c) {
      for (std::size_t y = 0; y < out.n_years(); ++y) {
        if (auto x = out.value(c, y, v)) out.set_value(c, y, v, scale_value(*x, r));
      }
    }
    auto& existing = out.scaling();
    std::erase_if(existing, [&](const ScalingRecord& s) { return s.variable == r.variable; });
    existing.push_back(r);
  }
  return out;
}

GrowthSeries forward_growth(const PanelDataset& ds, int horizon) {
  if (horizon < 1) throw ConfigError(fmt::format("horizon must be >= 1, got {}", horizon));
  const auto gdp = ds.require_variable("GDP");
  GrowthSeries out;
  out.n_years = ds.n_years();
  out.values.assign(ds.n_countries() * ds.n_years(), std::nullopt);
  for (std::size_t c = 0; c < ds.n_countries(); ++c) {
    for (std::size_t y = 0; y < ds.n_years(); ++y) {
      const auto base = ds.value(c, y, gdp);
      if (!base) continue;
      const auto ahead = ds.year_index(ds.years()[y] + horizon);
      if (!ahead) continue;
      const auto future = ds.value(c, *ahead, gdp);
      if (!future) continue;
      if (*base == 0.0) {
        auto msg = fmt::format("GDP is zero for ({}, {}); response left undefined",
                               ds.countries()[c], ds.years()[y]);
        detail::log().warn("{}", msg);
        out.warnings.push_back(std::move(msg));
        continue;
      }
      out.values[c * ds.n_years() + y] = *future / *base - 1.0;
    }
  }
  return out;
}

DesignMatrix build_design(const PanelDataset& ds, const CrisisCatalog& catalog,
                          const std::vector<std::string>& confounders, int horizon) {
  std::vector<std::size_t> conf_idx;
  for (const auto& name : confounders) conf_idx.push_back(ds.require_variable(name));

  const GrowthSeries growth = forward_growth(ds, horizon);

  DesignMatrix dm;
  dm.confounder_names = confounders;
  dm.warnings = growth.warnings;
  for (const auto& e : catalog.events()) {
    if (!ds.country_index(e.country)) dm.unresolved_events.push_back(e);
  }
  if (!dm.unresolved_events.empty()) {
    auto msg = fmt::format("{} crisis event(s) reference countries absent from the panel",
                           dm.unresolved_events.size());
    detail::log().warn("{}", msg);
    dm.warnings.push_back(std::move(msg));
  }

  std::vector<double> response, treatment, conf_values;
  for (std::size_t c = 0; c < ds.n_countries(); ++c) {
    for (std::size_t y = 0; y < ds.n_years(); ++y) {
      if (!ds.present(c, y)) continue;
      const auto& resp = growth.at(c, y);
      if (!resp) continue;
      bool complete = true;
      for (auto v : conf_idx) {
        if (ds.missing(c, y, v)) {
          complete = false;
          break;
        }
      }
      if (!complete) continue;
      dm.rows.push_back({ds.countries()[c], ds.years()[y]});
      response.push_back(*resp);
      treatment.push_back(catalog.contains(ds.countries()[c], ds.years()[y]) ? 1.0 : 0.0);
      for (auto v : conf_idx) conf_values.push_back(*ds.value(c, y, v));
    }
  }
  if (dm.rows.empty()) throw EmptyDesignError("no usable rows: every row lacks a response or a confounder");

  const auto n = static_cast<Eigen::Index>(dm.rows.size());
  const auto p = static_cast<Eigen::Index>(conf_idx.size());
  dm.response = Eigen::Map<Eigen::VectorXd>(response.data(), n);
  dm.treatment = Eigen::Map<Eigen::VectorXd>(treatment.data(), n);
  dm.confounders = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      conf_values.data(), n, p);

  constexpr double kScaleTol = 1e-12;
  for (Eigen::Index j = 0; j < p; ++j) {
    const double lo = dm.confounders.col(j).minCoeff();
    const double hi = dm.confounders.col(j).maxCoeff();
    if (lo < -kScaleTol || hi > 1.0 + kScaleTol) {
      throw SchemaError(fmt::format("confounder '{}' is not scaled to [0, 1] (range [{}, {}])",
                                    confounders[j], lo, hi));
    }
  }

  dm.treated_count = static_cast<std::size_t>(dm.treatment.sum());
  dm.treated_share = static_cast<double>(dm.treated_count) / static_cast<double>(n);
  if (dm.treated_count == 0) {
    std::string msg = "design has no treated rows";
    detail::log().warn("{}", msg);
    dm.warnings.push_back(std::move(msg));
  }
  detail::log().info("design: {} rows, {} treated ({:.4f})", n, dm.treated_count, dm.treated_share);
  return dm;
}

CorrelationMatrix correlation_matrix(const DesignMatrix& dm) {
  const auto n = static_cast<Eigen::Index>(dm.n_rows());
  if (n < 2) throw InsufficientDataError("correlation needs at least 2 rows");
  const auto p = dm.confounders.cols();
  Eigen::MatrixXd data(n, p + 1);
  data.col(0) = dm.treatment;
  data.rightCols(p) = dm.confounders;

  CorrelationMatrix out;
  out.names.push_back("D");
  out.names.insert(out.names.end(), dm.confounder_names.begin(), dm.confounder_names.end());

  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  const Eigen::MatrixXd cross = centered.transpose() * centered;
  const Eigen::Index k = p + 1;
  std::vector<bool> constant(static_cast<std::size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    constant[j] = cross(j, j) == 0.0;
    if (constant[j]) out.constant_columns.push_back(out.names[j]);
  }
  out.values.resize(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    out.values(i, i) = 1.0;
    for (Eigen::Index j = 0; j < i; ++j) {
      double r = 0.0;
      if (!constant[i] && !constant[j]) {
        r = cross(i, j) / std::sqrt(cross(i, i) * cross(j, j));
        r = std::clamp(r, -1.0, 1.0);
      }
      out.values(i, j) = out.values(j, i) = r;
    }
  }
  return out;
}

void write_correlation_csv(const CorrelationMatrix& corr, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << "variable";
  for (const auto& name : corr.names) out << ',' << name;
  out << '\n';
  for (Eigen::Index i = 0; i < corr.values.rows(); ++i) {
    out << corr.names[i];
    for (Eigen::Index j = 0; j < corr.values.cols(); ++j) out << ',' << fmt::format("{}", corr.values(i, j));
    out << '\n';
  }
}

std::vector<VariableSummary> summarize_variables(const PanelDataset& ds) {
  std::vector<VariableSummary> out;
  for (std::size_t v = 0; v < ds.n_variables(); ++v) {
    std::vector<double> xs;
    for (std::size_t c = 0; c < ds.n_countries(); ++c) {
      for (std::size_t y = 0; y < ds.n_years(); ++y) {
        if (auto x = ds.value(c, y, v)) xs.push_back(*x);
      }
    }
    VariableSummary s{ds.variable_names()[v], xs.size(), std::nan(""), std::nan("")};
    if (!xs.empty()) {
      s.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    }
    if (xs.size() >= 2) {
      double ss = 0.0;
      for (double x : xs) ss += (x - s.mean) * (x - s.mean);
      s.sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    out.push_back(std::move(s));
  }
  return out;
}

double crisis_share(const PanelDataset& ds, const CrisisCatalog& catalog) {
  std::size_t rows = 0, treated = 0;
  for (std::size_t c = 0; c < ds.n_countries(); ++c) {
    for (std::size_t y = 0; y < ds.n_years(); ++y) {
      if (!ds.present(c, y)) continue;
      ++rows;
      if (catalog.contains(ds.countries()[c], ds.years()[y])) ++treated;
    }
  }
  return rows == 0 ? 0.0 : static_cast<double>(treated) / static_cast<double>(rows);
}

}  // namespace panelcausal
