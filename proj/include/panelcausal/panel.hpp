#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace panelcausal {

/// Identifies one observation of the panel.
struct RowKey {
  std::string country;
  int year = 0;

  friend bool operator==(const RowKey&, const RowKey&) = default;
  friend auto operator<=>(const RowKey&, const RowKey&) = default;
};

/// Min-max parameters recorded for one scaled variable.
struct ScalingRecord {
  std::string variable;
  double min = 0.0;
  double max = 0.0;
  bool constant = false;
};

/// Imbalanced country-year panel.
///
/// Storage is a dense country x year x variable cube over the sorted union of
/// countries and years. A (country, year) pair that never appeared in the input
/// is "absent": it is not a row of the panel and all its cells are missing.
/// Missing cells hold NaN in `values` and `true` in the mask; every other cell
/// holds a finite number.
class PanelDataset {
 public:
  PanelDataset() = default;
  PanelDataset(std::vector<std::string> countries, std::vector<int> years,
               std::vector<std::string> variable_names);

  const std::vector<std::string>& countries() const { return countries_; }
  const std::vector<int>& years() const { return years_; }
  const std::vector<std::string>& variable_names() const { return variable_names_; }
  std::size_t n_countries() const { return countries_.size(); }
  std::size_t n_years() const { return years_.size(); }
  std::size_t n_variables() const { return variable_names_.size(); }

  /// Number of (country, year) rows present.
  std::size_t n_rows() const;

  std::optional<std::size_t> country_index(std::string_view country) const;
  std::optional<std::size_t> year_index(int year) const;
  std::optional<std::size_t> variable_index(std::string_view name) const;
  /// Like variable_index but throws SchemaError for unknown names.
  std::size_t require_variable(std::string_view name) const;

  bool present(std::size_t c, std::size_t y) const { return present_[c * years_.size() + y]; }
  void set_present(std::size_t c, std::size_t y, bool on);

  bool missing(std::size_t c, std::size_t y, std::size_t v) const { return missing_[cell(c, y, v)]; }
  std::optional<double> value(std::size_t c, std::size_t y, std::size_t v) const;
  /// Stores a finite value; non-finite input marks the cell missing. Marks the row present.
  void set_value(std::size_t c, std::size_t y, std::size_t v, double x);
  /// Marks the cell missing and the row present.
  void set_missing(std::size_t c, std::size_t y, std::size_t v);

  const std::vector<ScalingRecord>& scaling() const { return scaling_; }
  std::vector<ScalingRecord>& scaling() { return scaling_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string message);

 private:
  std::size_t cell(std::size_t c, std::size_t y, std::size_t v) const {
    return (c * years_.size() + y) * variable_names_.size() + v;
  }

  std::vector<std::string> countries_;
  std::vector<int> years_;
  std::vector<std::string> variable_names_;
  std::vector<double> values_;
  std::vector<bool> missing_;
  std::vector<bool> present_;
  std::vector<ScalingRecord> scaling_;
  std::vector<std::string> warnings_;
};

enum class CrisisKind { banking, currency, sovereign, restructuring };

std::string_view to_string(CrisisKind kind);
/// Case-insensitive; throws EnumValueError on anything but the four kinds.
CrisisKind parse_crisis_kind(std::string_view token);

struct CrisisEvent {
  std::string country;
  int year = 0;
  CrisisKind kind = CrisisKind::banking;

  friend auto operator<=>(const CrisisEvent&, const CrisisEvent&) = default;
};

/// Set of crisis events. Kinds are kept for reporting; treatment ignores them.
class CrisisCatalog {
 public:
  /// Throws DuplicateEventError if the triple is already present.
  void add(CrisisEvent event);
  bool contains(std::string_view country, int year) const;
  const std::set<CrisisEvent>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }

 private:
  std::set<CrisisEvent> events_;
};

/// Estimation-ready panel: response, binary treatment, scaled confounders.
struct DesignMatrix {
  std::vector<RowKey> rows;
  Eigen::VectorXd response;
  Eigen::VectorXd treatment;
  Eigen::MatrixXd confounders;
  std::vector<std::string> confounder_names;
  bool has_intercept = true;

  std::size_t treated_count = 0;
  double treated_share = 0.0;
  /// Catalog events whose country is not part of the panel.
  std::vector<CrisisEvent> unresolved_events;
  std::vector<std::string> warnings;

  std::size_t n_rows() const { return rows.size(); }
};

/// Response values on the country x year grid of a panel; nullopt = undefined.
struct GrowthSeries {
  std::size_t n_years = 0;
  std::vector<std::optional<double>> values;
  std::vector<std::string> warnings;

  const std::optional<double>& at(std::size_t c, std::size_t y) const { return values[c * n_years + y]; }
};

struct CorrelationMatrix {
  std::vector<std::string> names;
  Eigen::MatrixXd values;
  /// Columns with zero variance; their off-diagonal correlations are 0.
  std::vector<std::string> constant_columns;
};

struct VariableSummary {
  std::string name;
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;
};

PanelDataset load_panel_csv(const std::filesystem::path& path);
CrisisCatalog load_crisis_csv(const std::filesystem::path& path);
void write_panel_csv(const PanelDataset& ds, const std::filesystem::path& path);
void write_crisis_csv(const CrisisCatalog& catalog, const std::filesystem::path& path);

/// Carries the latest earlier observation forward within each country and variable.
PanelDataset forward_fill(const PanelDataset& ds);

/// Pooled min-max scaling of the named variables to [0, 1].
PanelDataset minmax_scale(const PanelDataset& ds, const std::vector<std::string>& vars);

/// Re-applies recorded scaling parameters to an unscaled dataset.
PanelDataset apply_scaling(const PanelDataset& raw, const std::vector<ScalingRecord>& records);

/// GDP_{t+h} / GDP_t - 1, with h measured in calendar years.
GrowthSeries forward_growth(const PanelDataset& ds, int horizon = 2);

DesignMatrix build_design(const PanelDataset& ds, const CrisisCatalog& catalog,
                          const std::vector<std::string>& confounders, int horizon = 2);

/// Pearson correlations of [D | confounders].
CorrelationMatrix correlation_matrix(const DesignMatrix& dm);
void write_correlation_csv(const CorrelationMatrix& corr, const std::filesystem::path& path);

/// Mean and sample standard deviation of every variable over observed cells.
std::vector<VariableSummary> summarize_variables(const PanelDataset& ds);

/// Share of panel rows with at least one crisis event.
double crisis_share(const PanelDataset& ds, const CrisisCatalog& catalog);

}  // namespace panelcausal
