#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "doctest.h"
#include "panelcausal/error.hpp"
#include "panelcausal/regress.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace panelcausal;

namespace {

LinearDesign make_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, bool intercept = true) {
  LinearDesign d;
  d.response = y;
  d.regressors = x;
  d.has_intercept = intercept;
  for (Eigen::Index j = 0; j < x.cols(); ++j) d.names.push_back("x" + std::to_string(j));
  d.rows = testing::grid_rows(1, static_cast<int>(y.size()));
  d.clusters.assign(static_cast<std::size_t>(y.size()), 0);
  return d;
}

}  // namespace

TEST_SUITE("regress") {

TEST_CASE("noiseless line") {
  Eigen::MatrixXd x(10, 1);
  Eigen::VectorXd y(10);
  for (int i = 0; i < 10; ++i) {
    x(i, 0) = i * 0.37 - 1.0;
    y[i] = 2.0 * x(i, 0) + 1.0;
  }
  const auto fit = ols_fit(make_linear(x, y));
  CHECK(fit.coefficient_names == std::vector<std::string>{"const", "x0"});
  CHECK(std::abs(fit.coefficient("const") - 1.0) <= 1e-10);
  CHECK(std::abs(fit.coefficient("x0") - 2.0) <= 1e-10);
  CHECK(std::abs(fit.r_squared - 1.0) <= 1e-10);
}

TEST_CASE("intercept-only model returns the mean") {
  Eigen::VectorXd y(6);
  y << 1, 4, 2, 8, 5, 7;
  const auto fit = ols_fit(make_linear(Eigen::MatrixXd(6, 0), y));
  REQUIRE(fit.coefficients.size() == 1);
  CHECK(fit.coefficients[0] == doctest::Approx(y.mean()).epsilon(1e-14));
  CHECK(fit.standard_errors[0] == doctest::Approx(std::sqrt((y.array() - y.mean()).square().sum() / 5.0 / 6.0)));
}

TEST_CASE("random 50x4 design matches the pseudoinverse oracle") {
  std::mt19937_64 rng(1);
  for (int rep = 0; rep < 10; ++rep) {
    const Eigen::MatrixXd x = testing::random_matrix(rng, 50, 4);
    const Eigen::VectorXd y = x * Eigen::Vector4d(0.5, -1, 2, 0) + testing::random_vector(rng, 50);
    const auto fit = ols_fit(make_linear(x, y));
    Eigen::MatrixXd full(50, 5);
    full << Eigen::VectorXd::Ones(50), x;
    const auto oracle = testing::classical_oracle(full, y);
    CHECK((fit.coefficients - oracle.beta).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK((fit.standard_errors - oracle.se).cwiseAbs().maxCoeff() <= 1e-8);
    CHECK(fit.dof == 45);
  }
}

TEST_CASE("FitResult invariants") {
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    const int n = 30 + 5 * rep;
    const Eigen::MatrixXd x = testing::random_matrix(rng, n, 3);
    const Eigen::VectorXd y = x.col(0) + testing::random_vector(rng, n);
    const auto fit = ols_fit(make_linear(x, y), SeMode::classical, 0.95);
    const double tc = t_critical(fit.dof, 0.95);
    for (Eigen::Index j = 0; j < fit.coefficients.size(); ++j) {
      CHECK(fit.t_statistics[j] == doctest::Approx(fit.coefficients[j] / fit.standard_errors[j]).epsilon(1e-12));
      CHECK(fit.confidence_intervals[j].first ==
            doctest::Approx(fit.coefficients[j] - tc * fit.standard_errors[j]).epsilon(1e-12));
      CHECK(fit.confidence_intervals[j].second ==
            doctest::Approx(fit.coefficients[j] + tc * fit.standard_errors[j]).epsilon(1e-12));
      CHECK(fit.p_values[j] >= 0.0);
      CHECK(fit.p_values[j] <= 1.0);
    }
    CHECK(fit.r_squared >= 0.0);
    CHECK(fit.r_squared <= 1.0);
    CHECK(fit.adjusted_r_squared <= fit.r_squared);
    CHECK(std::abs(fit.residuals.sum()) <= 1e-8);

    // Orthogonality, scaled by column norms.
    Eigen::MatrixXd full(n, 4);
    full << Eigen::VectorXd::Ones(n), x;
    for (Eigen::Index j = 0; j < 4; ++j) {
      const double scale = full.col(j).norm() * fit.residuals.norm();
      CHECK(std::abs(full.col(j).dot(fit.residuals)) <= 1e-8 * scale);
    }

    // R^2 by separate accumulation.
    double ssr = 0.0, sst = 0.0, mean = 0.0;
    for (int i = 0; i < n; ++i) mean += y[i];
    mean /= n;
    for (int i = 0; i < n; ++i) {
      ssr += fit.residuals[i] * fit.residuals[i];
      sst += (y[i] - mean) * (y[i] - mean);
    }
    CHECK(fit.r_squared == doctest::Approx(1.0 - ssr / sst).epsilon(1e-12));
  }
}

TEST_CASE("scale equivariance") {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd x = testing::random_matrix(rng, 40, 3);
  const Eigen::VectorXd y = x * Eigen::Vector3d(1, -2, 0.3) + testing::random_vector(rng, 40);
  const auto base = ols_fit(make_linear(x, y));
  for (double c : {0.001, 0.5, 7.0, 1e4}) {
    Eigen::MatrixXd xs = x;
    xs.col(1) *= c;
    const auto fit = ols_fit(make_linear(xs, y));
    CHECK(std::abs(fit.coefficients[2] * c - base.coefficients[2]) <= 1e-10 * std::max(1.0, std::abs(base.coefficients[2])));
    CHECK(std::abs(fit.standard_errors[2] * c - base.standard_errors[2]) <= 1e-10);
    for (Eigen::Index j = 0; j < 4; ++j) {
      CHECK(fit.t_statistics[j] == doctest::Approx(base.t_statistics[j]).epsilon(1e-9));
      CHECK(fit.p_values[j] == doctest::Approx(base.p_values[j]).epsilon(1e-9));
    }
    CHECK(fit.r_squared == doctest::Approx(base.r_squared).epsilon(1e-12));
  }
}

TEST_CASE("row permutation leaves statistics unchanged") {
  std::mt19937_64 rng(4);
  const int n = 60;
  const Eigen::MatrixXd x = testing::random_matrix(rng, n, 4);
  const Eigen::VectorXd y = testing::random_vector(rng, n);
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Eigen::MatrixXd xp(n, 4);
  Eigen::VectorXd yp(n);
  for (int i = 0; i < n; ++i) {
    xp.row(i) = x.row(perm[i]);
    yp[i] = y[perm[i]];
  }
  const auto a = ols_fit(make_linear(x, y));
  const auto b = ols_fit(make_linear(xp, yp));
  CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((a.standard_errors - b.standard_errors).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((a.p_values - b.p_values).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(a.r_squared == doctest::Approx(b.r_squared).epsilon(1e-13));
}

TEST_CASE("cluster standard errors match the sandwich formula") {
  std::mt19937_64 rng(5);
  const int groups = 8, per = 12, n = groups * per;
  const Eigen::MatrixXd x = testing::random_matrix(rng, n, 2);
  const Eigen::VectorXd y = x.col(0) + testing::random_vector(rng, n);
  auto d = make_linear(x, y);
  for (int i = 0; i < n; ++i) d.clusters[i] = i / per;
  const auto fit = ols_fit(d, SeMode::cluster_by_country);

  Eigen::MatrixXd full(n, 3);
  full << Eigen::VectorXd::Ones(n), x;
  const Eigen::MatrixXd bread = (full.transpose() * full).inverse();
  const Eigen::VectorXd u = y - full * (bread * full.transpose() * y);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(3, 3);
  for (int g = 0; g < groups; ++g) {
    const Eigen::VectorXd s = full.middleRows(g * per, per).transpose() * u.segment(g * per, per);
    meat += s * s.transpose();
  }
  const double corr = double(groups) / (groups - 1) * double(n - 1) / double(n - 3);
  const Eigen::MatrixXd v = corr * bread * meat * bread;
  CHECK((fit.standard_errors - v.diagonal().cwiseSqrt()).cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(fit.dof == groups - 1);
  CHECK(fit.se_mode == SeMode::cluster_by_country);
}

TEST_CASE("cluster mode needs two clusters") {
  std::mt19937_64 rng(6);
  auto d = make_linear(testing::random_matrix(rng, 20, 1), testing::random_vector(rng, 20));
  CHECK_THROWS_AS(ols_fit(d, SeMode::cluster_by_country), InsufficientDataError);
}

TEST_CASE("ols_fit errors") {
  std::mt19937_64 rng(7);
  SUBCASE("n <= p") {
    CHECK_THROWS_AS(ols_fit(make_linear(testing::random_matrix(rng, 3, 2), testing::random_vector(rng, 3))),
                    InsufficientDataError);
  }
  SUBCASE("rank deficiency names the collinear columns") {
    Eigen::MatrixXd x = testing::random_matrix(rng, 20, 4);
    x.col(3) = 2.0 * x.col(1) - x.col(2);
    try {
      ols_fit(make_linear(x, testing::random_vector(rng, 20)));
      FAIL("expected RankDeficientError");
    } catch (const RankDeficientError& e) {
      auto cols = e.columns();
      std::sort(cols.begin(), cols.end());
      CHECK(cols == std::vector<std::string>{"x1", "x2", "x3"});
    }
  }
  SUBCASE("constant column collides with the intercept") {
    Eigen::MatrixXd x = testing::random_matrix(rng, 20, 2);
    x.col(1).setConstant(3.0);
    try {
      ols_fit(make_linear(x, testing::random_vector(rng, 20)));
      FAIL("expected RankDeficientError");
    } catch (const RankDeficientError& e) {
      auto cols = e.columns();
      std::sort(cols.begin(), cols.end());
      CHECK(cols == std::vector<std::string>{"const", "x1"});
    }
  }
}

TEST_CASE("predict") {
  std::mt19937_64 rng(8);
  const Eigen::MatrixXd x = testing::random_matrix(rng, 25, 2);
  const Eigen::VectorXd y = testing::random_vector(rng, 25);
  auto d = make_linear(x, y);
  d.names = {"D", "X1"};
  const auto fit = ols_fit(d);
  SUBCASE("round trip") { CHECK(((predict(fit, d) + fit.residuals) - y).cwiseAbs().maxCoeff() <= 1e-10); }
  SUBCASE("zero row gives the intercept") {
    auto z = d;
    z.regressors.setZero();
    CHECK(predict(fit, z)[0] == doctest::Approx(fit.coefficient("const")).epsilon(1e-14));
  }
  SUBCASE("counterfactual pair differs by the treatment coefficient") {
    auto on = d, off = d;
    on.regressors.col(0).setOnes();
    off.regressors.col(0).setZero();
    const Eigen::VectorXd diff = predict(fit, on) - predict(fit, off);
    CHECK((diff.array() - fit.coefficient("D")).abs().maxCoeff() <= 1e-12);
  }
  SUBCASE("column order is matched by name") {
    auto swapped = d;
    swapped.names = {"X1", "D"};
    swapped.regressors.col(0) = d.regressors.col(1);
    swapped.regressors.col(1) = d.regressors.col(0);
    CHECK((predict(fit, swapped) - predict(fit, d)).cwiseAbs().maxCoeff() <= 1e-12);
  }
  SUBCASE("mismatch lists missing and extra names") {
    auto bad = d;
    bad.names = {"D", "X9"};
    try {
      predict(fit, bad);
      FAIL("expected SchemaError");
    } catch (const SchemaError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("X1") != std::string::npos);
      CHECK(msg.find("X9") != std::string::npos);
    }
  }
}

TEST_CASE("significant_subset") {
  Eigen::MatrixXd x(12, 2);
  Eigen::VectorXd y(12);
  for (int i = 0; i < 12; ++i) {
    x(i, 0) = i;
    x(i, 1) = (i * i) % 7;
    y[i] = 1.0 + 2.0 * x(i, 0) - 0.5 * x(i, 1);
  }
  const auto fit = ols_fit(make_linear(x, y));
  const auto all = significant_subset(fit, 0.05);
  CHECK(all.coefficient_names == fit.coefficient_names);
  CHECK(all.coefficients == fit.coefficients);
  CHECK(significant_subset(fit, 0.0).coefficient_names.empty());
}

TEST_CASE("significant_subset keeps estimates without refitting") {
  std::mt19937_64 rng(9);
  const Eigen::MatrixXd x = testing::random_matrix(rng, 80, 3);
  const Eigen::VectorXd y = 3.0 * x.col(0) + testing::random_vector(rng, 80);
  const auto fit = ols_fit(make_linear(x, y));
  const auto sub = significant_subset(fit, 0.05);
  for (std::size_t k = 0; k < sub.coefficient_names.size(); ++k) {
    CHECK(sub.coefficients[k] == fit.coefficient(sub.coefficient_names[k]));
    CHECK(sub.p_values[k] < 0.05);
  }
  CHECK(sub.index_of("x0") >= 0);
}

TEST_CASE("null coefficient is mostly excluded at alpha 0.05") {
  std::mt19937_64 rng(10);
  const int draws = 200, n = 500;
  int excluded = 0;
  for (int r = 0; r < draws; ++r) {
    const Eigen::MatrixXd x = testing::random_matrix(rng, n, 2);
    const Eigen::VectorXd y = 1.0 + 0.5 * x.col(0).array() + testing::random_vector(rng, n).array();
    const auto sub = significant_subset(ols_fit(make_linear(x, y)), 0.05);
    if (sub.index_of("x1") < 0) ++excluded;
  }
  MESSAGE("null coefficient excluded in " << excluded << " of " << draws);
  CHECK(excluded >= 180);
}

TEST_CASE("t distribution helpers") {
  CHECK(t_critical(10, 0.95) == doctest::Approx(2.2281388519649).epsilon(1e-10));
  CHECK(t_critical(1000000, 0.95) == doctest::Approx(1.959966).epsilon(1e-5));
  CHECK(t_pvalue(0.0, 5) == doctest::Approx(1.0));
  CHECK(t_pvalue(2.2281388519649, 10) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(t_pvalue(-2.2281388519649, 10) == doctest::Approx(0.05).epsilon(1e-9));
  CHECK(t_pvalue(INFINITY, 10) == 0.0);
}

TEST_CASE("se mode names") {
  CHECK(parse_se_mode("classical") == SeMode::classical);
  CHECK(parse_se_mode("cluster") == SeMode::cluster_by_country);
  CHECK(parse_se_mode("cluster_by_country") == SeMode::cluster_by_country);
  CHECK_THROWS_AS(parse_se_mode("robust"), ConfigError);
}

TEST_CASE("pooled design from a DesignMatrix") {
  const auto rows = testing::grid_rows(3, 4);
  Eigen::VectorXd d = Eigen::VectorXd::Zero(12);
  d[5] = d[9] = 1;
  Eigen::MatrixXd x(12, 1);
  for (int i = 0; i < 12; ++i) x(i, 0) = (i % 5) / 4.0;
  Eigen::VectorXd y = 0.1 - 0.05 * d.array() + 0.2 * x.col(0).array();
  const auto fit = ols_fit(testing::make_design(rows, y, d, x));
  CHECK(fit.coefficient_names == std::vector<std::string>{"const", "D", "X1"});
  CHECK(fit.coefficient("D") == doctest::Approx(-0.05).epsilon(1e-10));
  CHECK(country_clusters(rows) == std::vector<int>{0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2});
}

}  // TEST_SUITE
