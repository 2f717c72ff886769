#include "panelcausal/lasso.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <fmt/format.h>

#include "log.hpp"
#include "panelcausal/error.hpp"

namespace panelcausal {

double soft_threshold(double z, double gamma) {
  if (z > gamma) return z - gamma;
  if (z < -gamma) return z + gamma;
  return 0.0;
}

Eigen::Index LassoFit::n_nonzero() const {
  return (coefficients.array() != 0.0).count();
}

double LassoFit::coefficient(std::string_view name) const {
  auto it = std::find(coefficient_names.begin(), coefficient_names.end(), name);
  if (it == coefficient_names.end()) throw SchemaError(fmt::format("fit has no coefficient '{}'", name));
  return coefficients[it - coefficient_names.begin()];
}

namespace {

/// Column centers and scales used to put the penalty on a common footing.
struct Standardization {
  Eigen::RowVectorXd center;
  Eigen::RowVectorXd scale;  // 0 for constant columns
  double y_center = 0.0;
};

Standardization standardize(const LinearDesign& d) {
  const auto n = static_cast<double>(d.n_rows());
  Standardization s;
  const auto p = d.regressors.cols();
  s.center = Eigen::RowVectorXd::Zero(p);
  s.scale = Eigen::RowVectorXd::Zero(p);
  if (d.has_intercept) {
    s.center = d.regressors.colwise().mean();
    s.y_center = d.response.mean();
  }
  for (Eigen::Index j = 0; j < p; ++j) {
    const double ss = (d.regressors.col(j).array() - s.center[j]).square().sum();
    s.scale[j] = std::sqrt(ss / n);
  }
  return s;
}

Eigen::MatrixXd standardized_columns(const LinearDesign& d, const Standardization& s) {
  Eigen::MatrixXd z = d.regressors.rowwise() - s.center;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (s.scale[j] > 0.0) {
      z.col(j) /= s.scale[j];
    } else {
      z.col(j).setZero();
    }
  }
  return z;
}

}  // namespace

double lambda_max(const LinearDesign& design) {
  const auto s = standardize(design);
  const Eigen::MatrixXd z = standardized_columns(design, s);
  const Eigen::VectorXd r = design.response.array() - s.y_center;
  const auto n = static_cast<double>(design.n_rows());
  double out = 0.0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (s.scale[j] > 0.0) out = std::max(out, std::abs(0.0 + z.col(j).dot(r) / n));
  }
  return out;
}

LassoFit lasso_fit(const LinearDesign& design, double lambda, const LassoOptions& options) {
  if (!(lambda >= 0.0)) throw ConfigError(fmt::format("lambda must be >= 0, got {}", lambda));
  const Eigen::Index n = design.n_rows();
  if (n < 1) throw InsufficientDataError("lasso needs at least one row");
  const Eigen::Index p = design.regressors.cols();
  const auto nd = static_cast<double>(n);

  const Standardization s = standardize(design);
  const Eigen::MatrixXd z = standardized_columns(design, s);
  Eigen::VectorXd r = design.response.array() - s.y_center;
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);

  LassoFit fit;
  fit.coefficient_names = design.names;
  fit.lambda = lambda;
  fit.rows = design.rows;

  auto objective = [&] { return 0.5 * r.squaredNorm() / nd + lambda * b.lpNorm<1>(); };

  for (int sweep = 0; sweep < options.max_iter; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (s.scale[j] == 0.0) continue;
      const double old = b[j];
      const double updated = soft_threshold(old + z.col(j).dot(r) / nd, lambda);
      if (updated != old) {
        r.noalias() -= (updated - old) * z.col(j);
        b[j] = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    fit.objective_trace.push_back(objective());
    fit.n_iterations = sweep + 1;
    if (max_change < options.tol) {
      fit.converged = true;
      break;
    }
  }
  if (!fit.converged) {
    auto msg = fmt::format("lasso did not converge within {} sweeps (lambda = {})", options.max_iter, lambda);
    detail::log().warn("{}", msg);
    fit.warnings.push_back(std::move(msg));
  }

  fit.coefficients = Eigen::VectorXd::Zero(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    if (s.scale[j] > 0.0) fit.coefficients[j] = b[j] / s.scale[j];
  }
  fit.intercept = design.has_intercept ? s.y_center - s.center.dot(fit.coefficients) : 0.0;
  fit.objective_value = fit.objective_trace.empty() ? objective() : fit.objective_trace.back();
  fit.residuals = design.response - predict(fit, design);
  const double sst = design.has_intercept ? (design.response.array() - s.y_center).square().sum()
                                          : design.response.squaredNorm();
  fit.r_squared = sst > 0.0 ? 1.0 - fit.residuals.squaredNorm() / sst : 1.0;
  detail::log().debug("lasso: lambda={} sweeps={} nonzero={}", lambda, fit.n_iterations, fit.n_nonzero());
  return fit;
}

LassoFit lasso_fit(const DesignMatrix& dm, double lambda, const LassoOptions& options) {
  return lasso_fit(to_linear_design(dm), lambda, options);
}

double lasso_objective(const LinearDesign& design, double intercept, const Eigen::VectorXd& coefficients,
                       double lambda) {
  const auto s = standardize(design);
  const Eigen::VectorXd r =
      (design.response - design.regressors * coefficients).array() - intercept;
  const auto n = static_cast<double>(design.n_rows());
  return 0.5 * r.squaredNorm() / n + lambda * (s.scale.transpose().array() * coefficients.array().abs()).sum();
}

double kkt_violation(const LinearDesign& design, const LassoFit& fit) {
  const auto s = standardize(design);
  const Eigen::MatrixXd z = standardized_columns(design, s);
  const Eigen::VectorXd r = design.response - predict(fit, design);
  const auto n = static_cast<double>(design.n_rows());
  double worst = design.has_intercept ? std::abs(r.mean()) : 0.0;
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    if (s.scale[j] == 0.0) continue;
    const double g = z.col(j).dot(r) / n;
    const double b = fit.coefficients[j];
    const double v = b != 0.0 ? std::abs(g - std::copysign(fit.lambda, b))
                              : std::max(0.0, std::abs(g) - fit.lambda);
    worst = std::max(worst, v);
  }
  return worst;
}

std::vector<double> lambda_grid(const LinearDesign& design, int count, double ratio) {
  if (count < 1) throw ConfigError("lambda grid needs at least one point");
  const double top = lambda_max(design);
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(count));
  if (count == 1) return {top};
  for (int i = 0; i < count; ++i) {
    grid.push_back(top * std::pow(ratio, static_cast<double>(i) / static_cast<double>(count - 1)));
  }
  return grid;
}

Eigen::VectorXd predict(const LassoFit& fit, const LinearDesign& design) {
  if (design.names != fit.coefficient_names) {
    throw SchemaError("design columns do not match the lasso fit");
  }
  return (design.regressors * fit.coefficients).array() + fit.intercept;
}

LinearDesign subset_rows(const LinearDesign& design, const std::vector<Eigen::Index>& rows) {
  LinearDesign out;
  out.names = design.names;
  out.has_intercept = design.has_intercept;
  const auto m = static_cast<Eigen::Index>(rows.size());
  out.response.resize(m);
  out.regressors.resize(m, design.regressors.cols());
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto src = rows[i];
    out.response[i] = design.response[src];
    out.regressors.row(i) = design.regressors.row(src);
    if (!design.rows.empty()) out.rows.push_back(design.rows[src]);
    if (!design.clusters.empty()) out.clusters.push_back(design.clusters[src]);
  }
  return out;
}

std::vector<int> assign_folds(std::span<const double> treatment, int k, std::uint64_t seed) {
  if (k < 2) throw FoldConfigError(fmt::format("need at least 2 folds, got {}", k));
  if (treatment.size() < static_cast<std::size_t>(k)) {
    throw FoldConfigError(fmt::format("{} rows cannot fill {} folds", treatment.size(), k));
  }
  std::vector<std::size_t> treated, control;
  for (std::size_t i = 0; i < treatment.size(); ++i) {
    (treatment[i] != 0.0 ? treated : control).push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(treated.begin(), treated.end(), rng);
  std::shuffle(control.begin(), control.end(), rng);
  std::vector<int> folds(treatment.size(), 0);
  int next = 0;
  for (auto i : treated) {
    folds[i] = next;
    next = (next + 1) % k;
  }
  for (auto i : control) {
    folds[i] = next;
    next = (next + 1) % k;
  }
  return folds;
}

CvResult select_lambda_cv(const LinearDesign& design, std::span<const double> treatment,
                          const std::vector<double>& grid, int k, std::uint64_t seed,
                          const LassoOptions& options) {
  if (grid.empty()) throw ConfigError("lambda grid is empty");
  if (treatment.size() != static_cast<std::size_t>(design.n_rows())) {
    throw SchemaError("treatment vector does not match the design rows");
  }
  const auto folds = assign_folds(treatment, k, seed);

  std::vector<std::vector<Eigen::Index>> train(static_cast<std::size_t>(k)), test(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < folds.size(); ++i) {
    for (int f = 0; f < k; ++f) {
      (folds[i] == f ? test : train)[static_cast<std::size_t>(f)].push_back(static_cast<Eigen::Index>(i));
    }
  }
  for (int f = 0; f < k; ++f) {
    if (test[f].empty() || train[f].empty()) {
      throw FoldConfigError(fmt::format("fold {} is empty", f));
    }
  }

  std::vector<LinearDesign> train_sets, test_sets;
  for (int f = 0; f < k; ++f) {
    train_sets.push_back(subset_rows(design, train[f]));
    test_sets.push_back(subset_rows(design, test[f]));
  }

  CvResult out;
  out.folds = k;
  out.seed = seed;
  for (double lambda : grid) {
    std::vector<double> mses;
    for (int f = 0; f < k; ++f) {
      const auto fit = lasso_fit(train_sets[f], lambda, options);
      const Eigen::VectorXd err = test_sets[f].response - predict(fit, test_sets[f]);
      mses.push_back(err.squaredNorm() / static_cast<double>(err.size()));
    }
    CvRow row;
    row.lambda = lambda;
    row.mean_mse = std::accumulate(mses.begin(), mses.end(), 0.0) / static_cast<double>(k);
    double ss = 0.0;
    for (double m : mses) ss += (m - row.mean_mse) * (m - row.mean_mse);
    row.sd_mse = std::sqrt(ss / static_cast<double>(k - 1));
    row.n_nonzero = lasso_fit(design, lambda, options).n_nonzero();
    out.table.push_back(row);
  }

  const CvRow* best = &out.table.front();
  for (const auto& row : out.table) {
    if (row.mean_mse < best->mean_mse || (row.mean_mse == best->mean_mse && row.lambda > best->lambda)) {
      best = &row;
    }
  }
  out.lambda_star = best->lambda;
  detail::log().info("cv: lambda* = {} over {} grid points, {} folds", out.lambda_star, grid.size(), k);
  return out;
}

CvResult select_lambda_cv(const DesignMatrix& dm, const std::vector<double>& grid, int k,
                          std::uint64_t seed, const LassoOptions& options) {
  const std::span<const double> d(dm.treatment.data(), static_cast<std::size_t>(dm.treatment.size()));
  return select_lambda_cv(to_linear_design(dm), d, grid, k, seed, options);
}

}  // namespace panelcausal
