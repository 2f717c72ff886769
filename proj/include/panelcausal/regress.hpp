#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "panelcausal/panel.hpp"

namespace panelcausal {

enum class SeMode { classical, cluster_by_country };

std::string_view to_string(SeMode mode);
/// Accepts "classical", "cluster" and "cluster_by_country".
SeMode parse_se_mode(std::string_view token);

/// Name given to the intercept column in every fit.
inline constexpr std::string_view kInterceptName = "const";
/// Name given to the treatment column in every fit.
inline constexpr std::string_view kTreatmentName = "D";

/// A response plus named regressor columns. The intercept is implicit
/// (has_intercept) and never stored in `regressors`.
struct LinearDesign {
  std::vector<RowKey> rows;
  Eigen::VectorXd response;
  Eigen::MatrixXd regressors;
  std::vector<std::string> names;
  bool has_intercept = true;
  /// Cluster id per row; used only by SeMode::cluster_by_country.
  std::vector<int> clusters;

  Eigen::Index n_rows() const { return response.size(); }
  /// Number of estimated coefficients, intercept included.
  Eigen::Index n_params() const { return regressors.cols() + (has_intercept ? 1 : 0); }
  /// [1 | regressors] when has_intercept, else regressors.
  Eigen::MatrixXd full_matrix() const;
  std::vector<std::string> full_names() const;
};

/// Columns [D | confounders] with country clusters, as used for the pooled regression.
LinearDesign to_linear_design(const DesignMatrix& dm);

/// Country index of every row, in order of first appearance of each country label.
std::vector<int> country_clusters(const std::vector<RowKey>& rows);

struct FitResult {
  std::vector<std::string> coefficient_names;
  Eigen::VectorXd coefficients;
  Eigen::VectorXd standard_errors;
  Eigen::VectorXd t_statistics;
  Eigen::VectorXd p_values;
  std::vector<std::pair<double, double>> confidence_intervals;
  double ci_level = 0.95;
  double r_squared = 0.0;
  double adjusted_r_squared = 0.0;
  std::vector<RowKey> rows;
  Eigen::VectorXd residuals;
  Eigen::Index n_obs = 0;
  Eigen::Index n_params = 0;
  int dof = 0;
  SeMode se_mode = SeMode::classical;
  bool has_intercept = true;
  /// Estimated coefficient covariance, in coefficient order.
  Eigen::MatrixXd covariance;

  /// Index of a named coefficient, or -1.
  Eigen::Index index_of(std::string_view name) const;
  /// Estimate of a named coefficient; throws SchemaError if absent.
  double coefficient(std::string_view name) const;
};

/// Singular values below this fraction of the largest count as zero.
inline constexpr double kRankTolerance = 1e-10;

/// Least squares via column-pivoted Householder QR, with classical or
/// country-clustered standard errors and Student-t inference.
FitResult ols_fit(const LinearDesign& design, SeMode se_mode = SeMode::classical, double ci_level = 0.95);
FitResult ols_fit(const DesignMatrix& dm, SeMode se_mode = SeMode::classical, double ci_level = 0.95);

/// Fitted values X * beta, matching columns by name.
Eigen::VectorXd predict(const FitResult& fit, const LinearDesign& design);
Eigen::VectorXd predict(const FitResult& fit, const DesignMatrix& dm);

/// Keeps the coefficients with p < alpha; estimates are not refitted.
FitResult significant_subset(const FitResult& fit, double alpha = 0.05);

/// Two-sided Student-t critical value for the given confidence level.
double t_critical(int dof, double level);
/// Two-sided p-value of a t statistic.
double t_pvalue(double t, int dof);

}  // namespace panelcausal
