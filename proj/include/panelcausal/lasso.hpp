#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "panelcausal/panel.hpp"
#include "panelcausal/regress.hpp"

namespace panelcausal {

/// sign(z) * max(|z| - gamma, 0).
double soft_threshold(double z, double gamma);

/// L1-penalized least squares solution.
///
/// Every regressor is penalized; the intercept is not. The penalty acts on
/// coefficients of columns standardized to mean 0 and unit (population)
/// variance, so the reported objective is
///
///   (1/2n) * SSR + lambda * sum_j sd_j * |beta_j|
///
/// with beta in the original column units.
struct LassoFit {
  std::vector<std::string> coefficient_names;
  Eigen::VectorXd coefficients;
  double intercept = 0.0;
  double lambda = 0.0;
  int n_iterations = 0;
  bool converged = false;
  double objective_value = 0.0;
  /// Objective after each full coordinate sweep.
  std::vector<double> objective_trace;
  std::vector<RowKey> rows;
  Eigen::VectorXd residuals;
  double r_squared = 0.0;
  std::vector<std::string> warnings;

  Eigen::Index n_nonzero() const;
  /// Estimate of a named coefficient; throws SchemaError if absent.
  double coefficient(std::string_view name) const;
};

struct LassoOptions {
  double tol = 1e-7;
  int max_iter = 10000;
};

LassoFit lasso_fit(const LinearDesign& design, double lambda, const LassoOptions& options = {});
LassoFit lasso_fit(const DesignMatrix& dm, double lambda, const LassoOptions& options = {});

/// Objective of an arbitrary (intercept, coefficients) pair, on the same scale as LassoFit.
double lasso_objective(const LinearDesign& design, double intercept, const Eigen::VectorXd& coefficients,
                       double lambda);

/// Smallest lambda at which every penalized coefficient is zero.
double lambda_max(const LinearDesign& design);

/// Largest violation of the optimality conditions on the standardized scale.
double kkt_violation(const LinearDesign& design, const LassoFit& fit);

/// Log-spaced grid from lambda_max down to lambda_max * ratio.
std::vector<double> lambda_grid(const LinearDesign& design, int count = 50, double ratio = 1e-4);

Eigen::VectorXd predict(const LassoFit& fit, const LinearDesign& design);

struct CvRow {
  double lambda = 0.0;
  double mean_mse = 0.0;
  double sd_mse = 0.0;
  Eigen::Index n_nonzero = 0;
};

struct CvResult {
  double lambda_star = 0.0;
  std::vector<CvRow> table;
  int folds = 0;
  std::uint64_t seed = 0;
};

/// Fold label in [0, k) for every row. Treated and control rows are shuffled
/// separately and dealt round-robin, so per-fold treated counts differ by at most one.
std::vector<int> assign_folds(std::span<const double> treatment, int k, std::uint64_t seed);

/// K-fold cross-validation of the penalty; ties go to the larger lambda.
CvResult select_lambda_cv(const LinearDesign& design, std::span<const double> treatment,
                          const std::vector<double>& grid, int k, std::uint64_t seed,
                          const LassoOptions& options = {});
CvResult select_lambda_cv(const DesignMatrix& dm, const std::vector<double>& grid, int k,
                          std::uint64_t seed, const LassoOptions& options = {});

/// Rows of `design` selected by index.
LinearDesign subset_rows(const LinearDesign& design, const std::vector<Eigen::Index>& rows);

}  // namespace panelcausal
