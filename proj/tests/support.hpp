#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "panelcausal/panel.hpp"

namespace testing {

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(PANELCAUSAL_TEST_DATA) / name;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("panelcausal_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

  std::filesystem::path write(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p;
  }

 private:
  std::filesystem::path path_;
};

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline Eigen::MatrixXd random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline Eigen::VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n) {
  return random_matrix(rng, n, 1).col(0);
}

/// Design with the given rows, response, treatment and [0,1] confounders.
inline panelcausal::DesignMatrix make_design(std::vector<panelcausal::RowKey> rows, Eigen::VectorXd y,
                                             Eigen::VectorXd d, Eigen::MatrixXd x = {},
                                             std::vector<std::string> names = {}) {
  panelcausal::DesignMatrix dm;
  dm.rows = std::move(rows);
  dm.response = std::move(y);
  dm.treatment = std::move(d);
  if (x.size() == 0) x.resize(dm.response.size(), 0);
  dm.confounders = std::move(x);
  if (names.empty())
    for (Eigen::Index j = 0; j < dm.confounders.cols(); ++j) names.push_back("X" + std::to_string(j + 1));
  dm.confounder_names = std::move(names);
  dm.treated_count = static_cast<std::size_t>(dm.treatment.sum());
  dm.treated_share = dm.rows.empty() ? 0.0 : double(dm.treated_count) / double(dm.rows.size());
  return dm;
}

/// Country-major keys "c0".."c{C-1}" x years 2000.. ; `keep` filters cells.
template <class Keep>
std::vector<panelcausal::RowKey> grid_rows(int countries, int years, Keep keep) {
  std::vector<panelcausal::RowKey> rows;
  for (int c = 0; c < countries; ++c)
    for (int t = 0; t < years; ++t)
      if (keep(c, t)) rows.push_back({"c" + std::string(c < 10 ? "0" : "") + std::to_string(c), 2000 + t});
  return rows;
}

inline std::vector<panelcausal::RowKey> grid_rows(int countries, int years) {
  return grid_rows(countries, years, [](int, int) { return true; });
}

}  // namespace testing
