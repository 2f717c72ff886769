#pragma once

#include <cmath>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "panelcausal/lasso.hpp"
#include "panelcausal/panel.hpp"
#include "panelcausal/regress.hpp"

namespace panelcausal {

/// Design matrix augmented with country and year indicator blocks.
struct FixedEffectsDesign {
  DesignMatrix base;
  Eigen::MatrixXd country_dummies;  // rows x (C - 1)
  Eigen::MatrixXd year_dummies;     // rows x (T - 1)
  std::vector<std::string> country_dummy_names;
  std::vector<std::string> year_dummy_names;
  std::string reference_country;
  int reference_year = 0;
};

/// Overrides for the omitted categories; default is the smallest label.
struct ReferenceLevels {
  std::optional<std::string> country;
  std::optional<int> year;
};

FixedEffectsDesign encode_fixed_effects(const DesignMatrix& dm, const ReferenceLevels& refs = {});

/// [D | confounders | country dummies | year dummies] with an intercept.
LinearDesign twfe_linear_design(const FixedEffectsDesign& fe);

FitResult twfe_ols(const FixedEffectsDesign& fe, SeMode se_mode = SeMode::classical, double ci_level = 0.95);
LassoFit twfe_lasso(const FixedEffectsDesign& fe, double lambda, const LassoOptions& options = {});

/// OLS when no penalty is given, otherwise the lasso with only the intercept unpenalized.
std::variant<FitResult, LassoFit> twfe_fit(const FixedEffectsDesign& fe, std::optional<double> penalty,
                                           SeMode se_mode = SeMode::classical);

/// Residuals of D regressed on an intercept and the two indicator blocks.
Eigen::VectorXd treatment_residuals(const FixedEffectsDesign& fe);

/// Residual-based weights of each treated observation in the two-way estimate.
struct WeightDecomposition {
  std::vector<RowKey> rows;
  Eigen::VectorXd treatment;
  /// Auxiliary residual for every row.
  Eigen::VectorXd epsilon;
  /// Positions (into rows) of the treated observations.
  std::vector<Eigen::Index> treated_rows;
  /// eps * sum(D) / sum(eps * D), one per treated row.
  Eigen::VectorXd weights;
  /// weights / sum(D); sums to one.
  Eigen::VectorXd normalized_weights;
  /// Signed per-row contribution used for the heatmap (the residual itself).
  Eigen::VectorXd contributions;
  std::size_t total_treated = 0;
  double eps_dot_treatment = 0.0;

  std::size_t negative_count() const;
  /// Sum of the negative normalized weights.
  double negative_mass() const;
  /// sum(eps * y) / sum(eps * D): the two-way estimate without confounders.
  double weighted_estimate(const Eigen::VectorXd& y) const;
};

WeightDecomposition weight_decomposition(const Eigen::VectorXd& epsilon, const Eigen::VectorXd& treatment,
                                         std::vector<RowKey> rows = {});

/// Country x year grid of signed contributions; NaN marks an absent observation.
struct ContributionMatrix {
  std::vector<std::string> countries;
  std::vector<int> years;
  Eigen::MatrixXd values;
  /// Normalized weight for treated cells, NaN elsewhere.
  Eigen::MatrixXd treated_weights;
  double max_abs = 0.0;

  bool present(Eigen::Index c, Eigen::Index y) const { return !std::isnan(values(c, y)); }
};

ContributionMatrix contribution_matrix(const WeightDecomposition& wd);
ContributionMatrix contribution_matrix(const Eigen::VectorXd& contributions, const std::vector<RowKey>& rows);

void write_contribution_csv(const ContributionMatrix& m, const std::filesystem::path& path);
std::string contribution_svg(const ContributionMatrix& m);
void write_decomposition_json(const WeightDecomposition& wd, const std::filesystem::path& path);

/// Lead-indicator regression for eyeballing pre-treatment differences.
struct PretrendDiagnostic {
  FitResult fit;
  std::vector<int> leads;
  std::vector<std::string> lead_names;
  /// Wald F statistic and p-value for all leads jointly; NaN when there are none.
  double joint_f = 0.0;
  double joint_p = 0.0;
  std::string label;
};

/// Lead k is 1 at (i, t) when i is untreated at t and a treatment episode starts at t + k.
PretrendDiagnostic placebo_pretrend(const FixedEffectsDesign& fe, const std::vector<int>& leads,
                                    SeMode se_mode = SeMode::classical, double ci_level = 0.95);

}  // namespace panelcausal
