#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace panelcausal::cli {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kSuccess = 0, kUsageError = 1, kDataError = 2 };

struct RunConfig {
  std::string panel_path;
  std::string crisis_path;
  /// Empty means every panel variable except GDP.
  std::vector<std::string> confounders;
  int horizon = 2;
  std::string estimator = "mlr";
  std::optional<double> lambda;
  int cv_folds = 5;
  std::uint64_t seed = 0;
  std::string se_mode = "classical";
  std::string output_dir = ".";
  double ci_level = 0.95;
};

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace panelcausal::cli
