#include <cmath>
#include <set>

#include "doctest.h"
#include "json.hpp"
#include "panelcausal/error.hpp"
#include "panelcausal/synth.hpp"
#include "support.hpp"

using namespace panelcausal;

TEST_SUITE("synth") {

TEST_CASE("noiseless panels are recovered exactly in every staggering mode") {
  for (auto mode : {Staggering::staggered, Staggering::common_year, Staggering::recurrent}) {
    SynthConfig cfg;
    cfg.noise_sd = 0.0;
    cfg.staggering = mode;
    const auto fit = fit_synthetic_twfe(generate_panel(cfg, 3));
    CHECK(std::abs(fit.coefficient("D") - cfg.tau) <= 1e-8);
  }
}

TEST_CASE("same seed, same data") {
  SynthConfig cfg;
  cfg.staggering = Staggering::recurrent;
  testing::TempDir tmp("synth");
  const auto a = generate_panel(cfg, 11);
  const auto b = generate_panel(cfg, 11);
  const auto c = generate_panel(cfg, 12);
  write_panel_csv(a.panel, tmp / "a.csv");
  write_panel_csv(b.panel, tmp / "b.csv");
  write_panel_csv(c.panel, tmp / "c.csv");
  write_truth_json(a.truth, tmp / "a.json");
  write_truth_json(b.truth, tmp / "b.json");
  CHECK(testing::read_file(tmp / "a.csv") == testing::read_file(tmp / "b.csv"));
  CHECK(testing::read_file(tmp / "a.json") == testing::read_file(tmp / "b.json"));
  CHECK(testing::read_file(tmp / "a.csv") != testing::read_file(tmp / "c.csv"));
  CHECK(a.crises.events() == b.crises.events());
  CHECK(a.truth.observed == b.truth.observed);
}

TEST_CASE("potential outcomes are consistent with the observed outcome") {
  for (double tau_sd : {0.0, 0.03}) {
    SynthConfig cfg;
    cfg.tau_sd = tau_sd;
    const auto data = generate_panel(cfg, 21);
    const auto& t = data.truth;
    const int T = static_cast<int>(t.years.size());
    REQUIRE(t.rows.size() == std::size_t(cfg.n_countries * cfg.n_years));
    for (Eigen::Index i = 0; i < t.observed.size(); ++i) {
      const bool treated = t.treatment[i] == 1.0;
      CHECK(t.observed[i] == (treated ? t.y1[i] : t.y0[i]));
      const double effect = tau_sd == 0.0 ? t.tau_true : t.tau_country[i / T];
      CHECK(std::abs(t.y1[i] - t.y0[i] - effect) <= 1e-15);
      CHECK(data.crises.contains(t.rows[std::size_t(i)].country, t.rows[std::size_t(i)].year) == treated);
    }
  }
}

TEST_CASE("GDP levels reproduce the latent response") {
  SynthConfig cfg;
  cfg.horizon = 3;
  const auto data = generate_panel(cfg, 5);
  CHECK(data.panel.n_years() == std::size_t(cfg.n_years + cfg.horizon));
  const auto growth = forward_growth(data.panel, cfg.horizon);
  const auto& t = data.truth;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto c = *data.panel.country_index(t.rows[i].country);
    const auto y = *data.panel.year_index(t.rows[i].year);
    REQUIRE(growth.at(c, y).has_value());
    CHECK(std::abs(*growth.at(c, y) - t.observed[Eigen::Index(i)]) <= 1e-12);
  }
}

TEST_CASE("confounders are uniform on [0,1]") {
  SynthConfig cfg;
  cfg.n_confounders = 3;
  const auto data = generate_panel(cfg, 8);
  CHECK(data.confounder_names == std::vector<std::string>{"X1", "X2", "X3"});
  for (const auto& name : data.confounder_names) {
    const auto v = *data.panel.variable_index(name);
    for (std::size_t c = 0; c < data.panel.n_countries(); ++c)
      for (std::size_t y = 0; y < data.panel.n_years(); ++y) {
        const auto x = data.panel.value(c, y, v);
        REQUIRE(x.has_value());
        CHECK(*x >= 0.0);
        CHECK(*x <= 1.0);
      }
  }
}

TEST_CASE("assignment patterns") {
  SUBCASE("recurrent crises repeat every cycle") {
    SynthConfig cfg;
    cfg.staggering = Staggering::recurrent;
    const auto data = generate_panel(cfg, 9);
    int treated_countries = 0;
    for (const auto& years : data.truth.assignment) {
      if (years.empty()) continue;
      ++treated_countries;
      CHECK(years.size() >= 2);
      for (std::size_t k = 1; k < years.size(); ++k) CHECK(years[k] - years[k - 1] == 5);
    }
    CHECK(treated_countries == 25);
  }
  SUBCASE("staggered adoption is absorbing") {
    SynthConfig cfg;
    const auto data = generate_panel(cfg, 10);
    const int last = cfg.start_year + cfg.n_years - 1;
    for (const auto& years : data.truth.assignment) {
      if (years.empty()) continue;
      CHECK(years.back() == last);
      CHECK(years.back() - years.front() + 1 == int(years.size()));
      CHECK(years.front() > cfg.start_year);
    }
  }
  SUBCASE("common year wave") {
    SynthConfig cfg;
    cfg.staggering = Staggering::common_year;
    const auto data = generate_panel(cfg, 11);
    for (const auto& years : data.truth.assignment) {
      if (years.empty()) continue;
      CHECK(years.front() == cfg.start_year + cfg.n_years / 2);
    }
  }
}

TEST_CASE("untreated outcome trends match across groups without violations") {
  SynthConfig cfg;
  const int reps = 200;
  std::vector<double> diffs;
  for (int r = 0; r < reps; ++r) {
    const auto data = generate_panel(cfg, replication_seed(5150, r));
    const auto& t = data.truth;
    const int T = cfg.n_years;
    double sum_treated = 0.0, sum_control = 0.0;
    int n_treated = 0, n_control = 0;
    for (int c = 0; c < cfg.n_countries; ++c) {
      const double fd = (t.y0[c * T + T - 1] - t.y0[c * T]) / (T - 1);
      if (t.assignment[std::size_t(c)].empty()) {
        sum_control += fd;
        ++n_control;
      } else {
        sum_treated += fd;
        ++n_treated;
      }
    }
    diffs.push_back(sum_treated / n_treated - sum_control / n_control);
  }
  double mean = 0.0, ss = 0.0;
  for (double d : diffs) mean += d / reps;
  for (double d : diffs) ss += (d - mean) * (d - mean);
  const double se = std::sqrt(ss / (reps - 1)) / std::sqrt(double(reps));
  MESSAGE("trend gap " << mean << " (MC SE " << se << ")");
  CHECK(std::abs(mean) <= 4.0 * se);
}

TEST_CASE("outcome-dependent assignment biases the two-way estimate") {
  SynthConfig clean;
  SynthConfig confounded;
  confounded.violation = Violation::confounded_assignment;
  const auto a = monte_carlo_recovery(clean, 200, 99);
  const auto b = monte_carlo_recovery(confounded, 200, 99);
  MESSAGE("clean bias " << a.mean_bias << " (SE " << a.mc_standard_error << "), confounded bias " << b.mean_bias
                        << " (SE " << b.mc_standard_error << ")");
  CHECK(std::abs(b.mean_bias) > 2.0 * b.mc_standard_error);
  CHECK(std::abs(a.mean_bias) <= 3.0 * a.mc_standard_error);
}

TEST_CASE("monte_carlo_recovery basics") {
  SynthConfig noiseless;
  noiseless.noise_sd = 0.0;
  const auto s = monte_carlo_recovery(noiseless, 2, 1);
  CHECK(s.reps == 2);
  CHECK(s.failures == 0);
  CHECK(s.sd_tau_hat <= 1e-12);
  CHECK(std::abs(s.mean_bias) <= 1e-8);

  SynthConfig cfg;
  const auto x = monte_carlo_recovery(cfg, 5, 3);
  const auto y = monte_carlo_recovery(cfg, 5, 3);
  CHECK(x.tau_hats == y.tau_hats);
  testing::TempDir tmp("mc");
  write_recovery_json(x, tmp / "r.json");
  const auto j = nlohmann::json::parse(testing::read_file(tmp / "r.json"));
  CHECK(j["reps"] == 5);
  CHECK(j["mean_tau_hat"].get<double>() == doctest::Approx(x.mean_tau_hat));

  CHECK_THROWS_AS(monte_carlo_recovery(cfg, 1, 3), ConfigError);
}

TEST_CASE("too many failing replications is a harness error") {
  SynthConfig tiny;
  tiny.n_countries = 2;
  tiny.n_years = 3;
  tiny.n_confounders = 3;
  CHECK_THROWS_AS(monte_carlo_recovery(tiny, 10, 1), HarnessError);
}

TEST_CASE("replication seeds are distinct") {
  std::set<std::uint64_t> seen;
  for (int r = 0; r < 1000; ++r) seen.insert(replication_seed(42, r));
  CHECK(seen.size() == 1000);
  CHECK(replication_seed(42, 0) != replication_seed(43, 0));
}

TEST_CASE("configuration validation and files") {
  SynthConfig cfg;
  SUBCASE("treated share bounds") {
    for (double share : {0.0, 1.0, -0.1}) {
      cfg.treated_share = share;
      CHECK_THROWS_AS(generate_panel(cfg, 1), ConfigError);
    }
  }
  SUBCASE("sizes") {
    cfg.n_years = 2;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.n_years = 5;
    cfg.n_countries = 1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("confounded assignment without noise") {
    cfg.violation = Violation::confounded_assignment;
    cfg.noise_sd = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
  }
  SUBCASE("key-value file") {
    testing::TempDir tmp("cfg");
    const auto path = tmp.write("s.cfg",
                                "# clean run\n"
                                "n_countries = 12\n"
                                "staggering = Recurrent\n"
                                "cycle_years=4\n"
                                "\n"
                                "tau = -0.1  # stronger effect\n");
    const auto loaded = load_synth_config(path);
    CHECK(loaded.n_countries == 12);
    CHECK(loaded.staggering == Staggering::recurrent);
    CHECK(loaded.cycle_years == 4);
    CHECK(loaded.tau == -0.1);
    CHECK(loaded.n_years == 20);
    CHECK_THROWS_AS(load_synth_config(tmp.write("bad.cfg", "colour = red\n")), ConfigError);
    CHECK_THROWS_AS(load_synth_config(tmp.write("bad2.cfg", "n_years = many\n")), ConfigError);
    CHECK_THROWS_AS(load_synth_config(tmp.write("bad3.cfg", "n_years\n")), ConfigError);
  }
  SUBCASE("enum names") {
    CHECK(parse_staggering("common_year") == Staggering::common_year);
    CHECK(parse_violation("pretrend_dip") == Violation::pretrend_dip);
    CHECK_THROWS_AS(parse_staggering("wave"), ConfigError);
    CHECK_THROWS_AS(parse_violation("dip"), ConfigError);
  }
}

}  // TEST_SUITE
