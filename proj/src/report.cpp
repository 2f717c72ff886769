#include "panelcausal/report.hpp"

#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "panelcausal/error.hpp"

namespace panelcausal {

namespace {

nlohmann::ordered_json number_or_null(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

std::string cell(double x, int width) {
  if (std::isnan(x)) return fmt::format("{:>{}}", "nan", width);
  if (std::isinf(x)) return fmt::format("{:>{}}", x > 0 ? "inf" : "-inf", width);
  return fmt::format("{:>{}.6g}", x, width);
}

}  // namespace

nlohmann::ordered_json to_json(const FitResult& fit) {
  nlohmann::ordered_json doc;
  auto& table = doc["coefficients"] = nlohmann::ordered_json::array();
  for (std::size_t j = 0; j < fit.coefficient_names.size(); ++j) {
    const auto e = static_cast<Eigen::Index>(j);
    table.push_back({{"name", fit.coefficient_names[j]},
                     {"estimate", number_or_null(fit.coefficients[e])},
                     {"std_error", number_or_null(fit.standard_errors[e])},
                     {"t", number_or_null(fit.t_statistics[e])},
                     {"p", number_or_null(fit.p_values[e])},
                     {"ci_low", number_or_null(fit.confidence_intervals[j].first)},
                     {"ci_high", number_or_null(fit.confidence_intervals[j].second)}});
  }
  doc["statistics"] = {{"r_squared", number_or_null(fit.r_squared)},
                       {"adjusted_r_squared", number_or_null(fit.adjusted_r_squared)},
                       {"n", fit.n_obs},
                       {"p", fit.n_params},
                       {"dof", fit.dof},
                       {"se_mode", std::string(to_string(fit.se_mode))},
                       {"ci_level", fit.ci_level}};
  return doc;
}

nlohmann::ordered_json to_json(const LassoFit& fit) {
  nlohmann::ordered_json doc;
  auto& table = doc["coefficients"] = nlohmann::ordered_json::array();
  auto row = [](const std::string& name, double estimate) {
    return nlohmann::ordered_json{{"name", name},         {"estimate", number_or_null(estimate)},
                                  {"std_error", nullptr}, {"t", nullptr},
                                  {"p", nullptr},         {"ci_low", nullptr},
                                  {"ci_high", nullptr}};
  };
  table.push_back(row(std::string(kInterceptName), fit.intercept));
  for (std::size_t j = 0; j < fit.coefficient_names.size(); ++j) {
    table.push_back(row(fit.coefficient_names[j], fit.coefficients[static_cast<Eigen::Index>(j)]));
  }
  doc["statistics"] = {{"r_squared", number_or_null(fit.r_squared)},
                       {"adjusted_r_squared", nullptr},
                       {"n", fit.rows.size()},
                       {"p", fit.coefficients.size() + 1},
                       {"dof", nullptr},
                       {"se_mode", nullptr},
                       {"ci_level", nullptr}};
  doc["lambda"] = fit.lambda;
  doc["converged"] = fit.converged;
  doc["n_iterations"] = fit.n_iterations;
  doc["n_nonzero"] = fit.n_nonzero();
  doc["objective"] = number_or_null(fit.objective_value);
  return doc;
}

std::string to_text(const FitResult& fit, const std::string& title) {
  std::string out = title + "\n";
  out += fmt::format("n = {}   parameters = {}   dof = {}   se = {}\n", fit.n_obs, fit.n_params, fit.dof,
                     to_string(fit.se_mode));
  out += fmt::format("R^2 = {:.6f}   adjusted R^2 = {:.6f}\n\n", fit.r_squared, fit.adjusted_r_squared);
  const double lo_pct = 50.0 * (1.0 - fit.ci_level);
  out += fmt::format("{:<24}{:>14}{:>14}{:>14}{:>14}{:>14}{:>14}\n", "term", "estimate", "std.err", "t", "P>|t|",
                     fmt::format("[{:g}%", lo_pct), fmt::format("{:g}%]", 100.0 - lo_pct));
  for (std::size_t j = 0; j < fit.coefficient_names.size(); ++j) {
    const auto e = static_cast<Eigen::Index>(j);
    out += fmt::format("{:<24}", fit.coefficient_names[j]) + cell(fit.coefficients[e], 14) +
           cell(fit.standard_errors[e], 14) + cell(fit.t_statistics[e], 14) + cell(fit.p_values[e], 14) +
           cell(fit.confidence_intervals[j].first, 14) + cell(fit.confidence_intervals[j].second, 14) + "\n";
  }
  return out;
}

std::string to_text(const LassoFit& fit, const std::string& title) {
  std::string out = title + "\n";
  out += fmt::format("n = {}   lambda = {:.6g}   nonzero = {}   sweeps = {}   converged = {}\n", fit.rows.size(),
                     fit.lambda, fit.n_nonzero(), fit.n_iterations, fit.converged ? "yes" : "no");
  out += fmt::format("R^2 = {:.6f}\n\n", fit.r_squared);
  out += fmt::format("{:<24}{:>14}\n", "term", "estimate");
  out += fmt::format("{:<24}", kInterceptName) + cell(fit.intercept, 14) + "\n";
  for (std::size_t j = 0; j < fit.coefficient_names.size(); ++j) {
    out += fmt::format("{:<24}", fit.coefficient_names[j]) +
           cell(fit.coefficients[static_cast<Eigen::Index>(j)], 14) + "\n";
  }
  return out;
}

void write_cv_table_csv(const CvResult& cv, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError(fmt::format("cannot write '{}'", path.string()));
  out << "lambda,mean_mse,sd_mse,n_nonzero\n";
  for (const auto& row : cv.table) {
    out << fmt::format("{},{},{},{}\n", row.lambda, row.mean_mse, row.sd_mse, row.n_nonzero);
  }
}

}  // namespace panelcausal
