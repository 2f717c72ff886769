#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "panelcausal/lasso.hpp"
#include "panelcausal/regress.hpp"

namespace panelcausal {

/// Coefficient table plus a statistics block.
nlohmann::ordered_json to_json(const FitResult& fit);
/// Same layout as the OLS document; inference fields are null, plus lambda,
/// converged and n_iterations.
nlohmann::ordered_json to_json(const LassoFit& fit);

/// Aligned plain-text coefficient table.
std::string to_text(const FitResult& fit, const std::string& title);
std::string to_text(const LassoFit& fit, const std::string& title);

/// lambda, mean_mse, sd_mse, n_nonzero
void write_cv_table_csv(const CvResult& cv, const std::filesystem::path& path);

}  // namespace panelcausal
