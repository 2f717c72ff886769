#include "panelcausal/regress.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "log.hpp"
#include "panelcausal/error.hpp"

namespace panelcausal {

std::string_view to_string(SeMode mode) {
  return mode == SeMode::classical ? "classical" : "cluster_by_country";
}

SeMode parse_se_mode(std::string_view token) {
  if (token == "classical") return SeMode::classical;
  if (token == "cluster" || token == "cluster_by_country") return SeMode::cluster_by_country;
  throw ConfigError(fmt::format("unknown standard-error mode '{}' (expected classical or cluster)", token));
}

Eigen::MatrixXd LinearDesign::full_matrix() const {
  if (!has_intercept) return regressors;
  Eigen::MatrixXd x(response.size(), regressors.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(regressors.cols()) = regressors;
  return x;
}

std::vector<std::string> LinearDesign::full_names() const {
  std::vector<std::string> out;
  if (has_intercept) out.emplace_back(kInterceptName);
  out.insert(out.end(), names.begin(), names.end());
  return out;
}

std::vector<int> country_clusters(const std::vector<RowKey>& rows) {
  std::map<std::string, int> ids;
  std::vector<int> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    auto [it, inserted] = ids.emplace(r.country, static_cast<int>(ids.size()));
    out.push_back(it->second);
  }
  return out;
}

LinearDesign to_linear_design(const DesignMatrix& dm) {
  LinearDesign d;
  d.rows = dm.rows;
  d.response = dm.response;
  d.has_intercept = dm.has_intercept;
  d.regressors.resize(dm.response.size(), dm.confounders.cols() + 1);
  d.regressors.col(0) = dm.treatment;
  d.regressors.rightCols(dm.confounders.cols()) = dm.confounders;
  d.names.emplace_back(kTreatmentName);
  d.names.insert(d.names.end(), dm.confounder_names.begin(), dm.confounder_names.end());
  d.clusters = country_clusters(dm.rows);
  return d;
}

Eigen::Index FitResult::index_of(std::string_view name) const {
  auto it = std::find(coefficient_names.begin(), coefficient_names.end(), name);
  return it == coefficient_names.end() ? -1 : static_cast<Eigen::Index>(it - coefficient_names.begin());
}

double FitResult::coefficient(std::string_view name) const {
  const auto i = index_of(name);
  if (i < 0) throw SchemaError(fmt::format("fit has no coefficient '{}'", name));
  return coefficients[i];
}

double t_critical(int dof, double level) {
  boost::math::students_t dist(static_cast<double>(dof));
  return boost::math::quantile(dist, 0.5 + level / 2.0);
}

double t_pvalue(double t, int dof) {
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  boost::math::students_t dist(static_cast<double>(dof));
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

namespace {

[[noreturn]] void throw_rank_deficient(const Eigen::MatrixXd& r, const Eigen::VectorXi& perm,
                                       const std::vector<std::string>& names) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(r, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const double cutoff = kRankTolerance * sv[0];
  std::vector<bool> involved(names.size(), false);
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv[k] >= cutoff) continue;
    const Eigen::VectorXd v = svd.matrixV().col(k);
    const double scale = v.cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < v.size(); ++j) {
      if (std::abs(v[j]) > 1e-8 * scale) involved[perm[j]] = true;
    }
  }
  std::vector<std::string> cols;
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (involved[j]) cols.push_back(names[j]);
  }
  throw RankDeficientError(
      fmt::format("design is rank deficient; collinear columns: {}", fmt::join(cols, ", ")), cols);
}

}  // namespace

FitResult ols_fit(const LinearDesign& design, SeMode se_mode, double ci_level) {
  const Eigen::MatrixXd x = design.full_matrix();
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  const auto names = design.full_names();
  if (p == 0) throw SchemaError("design has no columns");
  if (n <= p) {
    throw InsufficientDataError(fmt::format("insufficient rows: {} rows for {} coefficients", n, p));
  }
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    throw ConfigError(fmt::format("confidence level must lie in (0, 1), got {}", ci_level));
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::VectorXi perm = qr.colsPermutation().indices();
  {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(r);
    const auto& sv = svd.singularValues();
    if (sv[0] == 0.0 || sv[p - 1] < kRankTolerance * sv[0]) throw_rank_deficient(r, perm, names);
  }

  FitResult fit;
  fit.coefficient_names = names;
  fit.coefficients = qr.solve(design.response);
  fit.rows = design.rows;
  fit.residuals = design.response - x * fit.coefficients;
  fit.n_obs = n;
  fit.n_params = p;
  fit.se_mode = se_mode;
  fit.ci_level = ci_level;
  fit.has_intercept = design.has_intercept;

  // (X'X)^-1 = P R^-1 R^-T P'
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  Eigen::MatrixXd xtx_inv(p, p);
  {
    const Eigen::MatrixXd inner = r_inv * r_inv.transpose();
    for (Eigen::Index i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j < p; ++j) xtx_inv(perm[i], perm[j]) = inner(i, j);
    }
  }

  const double ssr = fit.residuals.squaredNorm();
  if (se_mode == SeMode::classical) {
    fit.dof = static_cast<int>(n - p);
    fit.covariance = (ssr / static_cast<double>(n - p)) * xtx_inv;
  } else {
    if (design.clusters.size() != static_cast<std::size_t>(n)) {
      throw SchemaError("cluster standard errors need a cluster id for every row");
    }
    std::map<int, Eigen::VectorXd> scores;
    for (Eigen::Index i = 0; i < n; ++i) {
      auto [it, inserted] = scores.try_emplace(design.clusters[i], Eigen::VectorXd::Zero(p));
      it->second += x.row(i).transpose() * fit.residuals[i];
    }
    const auto g = static_cast<Eigen::Index>(scores.size());
    if (g < 2) throw InsufficientDataError("cluster standard errors need at least 2 clusters");
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(p, p);
    for (const auto& [id, s] : scores) meat.noalias() += s * s.transpose();
    const double correction = static_cast<double>(g) / static_cast<double>(g - 1) *
                              static_cast<double>(n - 1) / static_cast<double>(n - p);
    fit.dof = static_cast<int>(g - 1);
    fit.covariance = correction * xtx_inv * meat * xtx_inv;
  }

  fit.standard_errors = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  fit.t_statistics.resize(p);
  fit.p_values.resize(p);
  const double tcrit = t_critical(fit.dof, ci_level);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double b = fit.coefficients[j];
    const double se = fit.standard_errors[j];
    double t;
    if (se > 0.0) {
      t = b / se;
    } else {
      t = b == 0.0 ? std::numeric_limits<double>::quiet_NaN()
                   : std::copysign(std::numeric_limits<double>::infinity(), b);
    }
    fit.t_statistics[j] = t;
    fit.p_values[j] = t_pvalue(t, fit.dof);
    fit.confidence_intervals.emplace_back(b - tcrit * se, b + tcrit * se);
  }

  double sst;
  if (design.has_intercept) {
    sst = (design.response.array() - design.response.mean()).square().sum();
  } else {
    sst = design.response.squaredNorm();
  }
  if (sst > 0.0) {
    fit.r_squared = 1.0 - ssr / sst;
  } else {
    fit.r_squared = ssr == 0.0 ? 1.0 : 0.0;
  }
  const double base = design.has_intercept ? static_cast<double>(n - 1) : static_cast<double>(n);
  fit.adjusted_r_squared = 1.0 - (1.0 - fit.r_squared) * base / static_cast<double>(n - p);

  detail::log().debug("ols: n={} p={} r2={:.6f}", n, p, fit.r_squared);
  return fit;
}

FitResult ols_fit(const DesignMatrix& dm, SeMode se_mode, double ci_level) {
  return ols_fit(to_linear_design(dm), se_mode, ci_level);
}

Eigen::VectorXd predict(const FitResult& fit, const LinearDesign& design) {
  const auto names = design.full_names();
  std::vector<std::string> missing, extra;
  for (const auto& name : fit.coefficient_names) {
    if (std::find(names.begin(), names.end(), name) == names.end()) missing.push_back(name);
  }
  for (const auto& name : names) {
    if (fit.index_of(name) < 0) extra.push_back(name);
  }
  if (!missing.empty() || !extra.empty()) {
    throw SchemaError(fmt::format("design columns do not match the fit: missing [{}], extra [{}]",
                                  fmt::join(missing, ", "), fmt::join(extra, ", ")));
  }
  const Eigen::MatrixXd x = design.full_matrix();
  Eigen::VectorXd beta(x.cols());
  for (std::size_t j = 0; j < names.size(); ++j) beta[j] = fit.coefficient(names[j]);
  return x * beta;
}

Eigen::VectorXd predict(const FitResult& fit, const DesignMatrix& dm) {
  return predict(fit, to_linear_design(dm));
}

FitResult significant_subset(const FitResult& fit, double alpha) {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) {
    if (fit.p_values[j] < alpha) keep.push_back(j);
  }
  FitResult out = fit;
  const auto k = static_cast<Eigen::Index>(keep.size());
  out.coefficient_names.clear();
  out.confidence_intervals.clear();
  out.coefficients.resize(k);
  out.standard_errors.resize(k);
  out.t_statistics.resize(k);
  out.p_values.resize(k);
  out.covariance.resize(k, k);
  for (Eigen::Index a = 0; a < k; ++a) {
    const auto j = keep[a];
    out.coefficient_names.push_back(fit.coefficient_names[j]);
    out.confidence_intervals.push_back(fit.confidence_intervals[j]);
    out.coefficients[a] = fit.coefficients[j];
    out.standard_errors[a] = fit.standard_errors[j];
    out.t_statistics[a] = fit.t_statistics[j];
    out.p_values[a] = fit.p_values[j];
    for (Eigen::Index b = 0; b < k; ++b) out.covariance(a, b) = fit.covariance(j, keep[b]);
  }
  return out;
}

}  // namespace panelcausal
