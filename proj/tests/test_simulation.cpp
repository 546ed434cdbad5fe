#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "stagger/error.hpp"
#include "stagger/estimators.hpp"
#include "stagger/simulation.hpp"

using namespace stagger;

namespace {

// Mean configured effect over treated rows of a draw with no noise, unit or
// time variation: every outcome is the cell effect itself.
double noiseless_mean(SimConfig c, int horizon) {
  c.noise_sd = c.unit_sd = c.time_sd = 0.0;
  const auto p = simulate_panel(c, 0);
  double s = 0.0, n = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!p.treated(i) || (horizon > 0 && *p.relative_time(i) > horizon)) continue;
    s += p.outcome(i);
    n += 1.0;
  }
  return s / n;
}

}  // namespace

TEST_CASE("true estimands of the presets") {
  const auto a = true_estimands(preset("sim1"), 4);
  CHECK(a.overall == doctest::Approx(73.5 / 18.0));
  CHECK(a.capped == doctest::Approx(9.5 / 3.0));
  const auto b = true_estimands(preset("sim2"), 4);
  CHECK(b.overall == doctest::Approx(605.0 / 175.0));
  CHECK(b.capped == doctest::Approx(2.75));
  for (const auto& name : preset_names()) {
    CAPTURE(name);
    const auto c = preset(name);
    CHECK(true_estimands(c, 4).overall == doctest::Approx(noiseless_mean(c, 0)).epsilon(1e-12));
    CHECK(true_estimands(c, 4).capped == doctest::Approx(noiseless_mean(c, 4)).epsilon(1e-12));
  }
  REQUIRE(a.by_duration.size() == 7);
  CHECK(a.by_duration[0] == doctest::Approx(3.5 / 3.0));
}

TEST_CASE("preset layout") {
  const auto p = simulate_panel(preset("sim1"), 0);
  CHECK(p.n_units() == 50);
  CHECK(p.n_times() == 10);
  CHECK(p.cohorts() == std::vector<int>{4, 5, 6});
  const auto q = simulate_panel(preset("sim2"), 0);
  CHECK(q.n_units() == 50);
  CHECK_THROWS_AS(preset("sim3"), Error);
}

TEST_CASE("draws are reproducible and keyed by seed and rep") {
  const auto c = preset("sim1");
  const auto a = simulate_observations(c, 3);
  const auto b = simulate_observations(c, 3);
  REQUIRE(a.size() == b.size());
  bool same = true;
  for (std::size_t i = 0; i < a.size(); ++i) same = same && a[i].outcome == b[i].outcome && a[i].unit == b[i].unit;
  CHECK(same);
  const auto d = simulate_observations(c, 4);
  auto e_cfg = c;
  e_cfg.seed += 1;
  const auto e = simulate_observations(e_cfg, 3);
  CHECK(a[0].outcome != d[0].outcome);
  CHECK(a[0].outcome != e[0].outcome);
}

TEST_CASE("normal draws have unit variance") {
  SimConfig c;
  c.never_treated = 2000;
  c.n_times = 10;
  c.unit_sd = c.time_sd = 0.0;
  const auto rows = simulate_observations(c, 0);
  double s = 0.0, ss = 0.0;
  for (const auto& r : rows) s += r.outcome;
  const double mean = s / static_cast<double>(rows.size());
  for (const auto& r : rows) ss += (r.outcome - mean) * (r.outcome - mean);
  const double var = ss / static_cast<double>(rows.size() - 1);
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
  double tail = 0.0;
  for (const auto& r : rows) tail += std::abs(r.outcome) > 1.96 ? 1.0 : 0.0;
  CHECK(std::abs(tail / static_cast<double>(rows.size()) - 0.05) < 0.01);
}

TEST_CASE("noiseless single cohort with a constant effect") {
  SimConfig c;
  c.never_treated = 3;
  c.n_times = 6;
  c.noise_sd = 0.0;
  c.cohorts = {{3, 2, {5.0}}};
  const auto p = simulate_panel(c, 0);
  // With noise off, y - y(untreated counterpart) is the effect: the unit and
  // time draws cancel in the two-stage residual.
  CHECK(two_stage_did(p).value() == doctest::Approx(5.0).epsilon(1e-12));
  CHECK(did_regression(p).value() == doctest::Approx(5.0).epsilon(1e-12));
  c.unit_sd = c.time_sd = 0.0;
  const auto q = simulate_panel(c, 0);
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(q.outcome(i) == (q.treated(i) ? 5.0 : 0.0));
  CHECK(true_estimands(c, 2).overall == doctest::Approx(5.0));
  CHECK(effect_at(c.cohorts[0], 9) == 5.0);
}

TEST_CASE("effect paths hold their last value") {
  const CohortConfig k{4, 1, {1.0, 2.0, 3.5}};
  CHECK(effect_at(k, 0) == 0.0);
  CHECK(effect_at(k, 1) == 1.0);
  CHECK(effect_at(k, 3) == 3.5);
  CHECK(effect_at(k, 7) == 3.5);
}

TEST_CASE("configuration validation and JSON round trip") {
  auto c = preset("sim2");
  c.noise_sd = 1.4142135623730951;
  c.seed = 77;
  const auto back = parse_config(config_json(c));
  CHECK(back.name == c.name);
  CHECK(back.never_treated == c.never_treated);
  CHECK(back.noise_sd == c.noise_sd);
  CHECK(back.seed == c.seed);
  REQUIRE(back.cohorts.size() == 3);
  CHECK(back.cohorts[2].effects == c.cohorts[2].effects);
  CHECK(back.cohorts[1].size == 15);

  auto expect_config_error = [](const std::string& text) {
    try {
      parse_config(text);
      FAIL("expected ConfigError for " << text);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ConfigError);
    }
  };
  expect_config_error("{");
  expect_config_error(R"({"cohorts": []})");
  expect_config_error(R"({"never_treated": 3, "cohorts": [{"adoption": 12, "size": 1, "effects": [1]}]})");
  expect_config_error(R"({"never_treated": 3, "cohorts": [{"adoption": 3, "size": 0, "effects": [1]}]})");
  expect_config_error(R"({"never_treated": 3, "cohorts": [{"adoption": 3, "size": 1, "effects": []}]})");
  expect_config_error(R"({"never_treated": 3, "noise_sd": -1, "cohorts": []})");
}

TEST_CASE("Monte Carlo harness") {
  const auto c = preset("sim1");
  SUBCASE("one replication leaves the SD undefined") {
    const auto r = monte_carlo(c, 1, table_suite());
    for (const auto& s : r.summary) {
      CHECK(s.n == 1);
      CHECK(s.sd_undefined);
    }
  }
  SUBCASE("zero replications are rejected") {
    try {
      monte_carlo(c, 0, table_suite());
      FAIL("expected ConfigError");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ConfigError);
    }
  }
  SUBCASE("results do not depend on the thread count") {
    const auto a = monte_carlo(c, 6, table_suite(), 1);
    const auto b = monte_carlo(c, 6, table_suite(), 3);
    REQUIRE(a.draws.size() == b.draws.size());
    bool same = true;
    for (std::size_t k = 0; k < a.draws.size(); ++k) {
      same = same && a.draws[k].rep == b.draws[k].rep && a.draws[k].estimator == b.draws[k].estimator &&
             a.draws[k].value == b.draws[k].value && a.draws[k].se == b.draws[k].se;
    }
    CHECK(same);
    CHECK(a.draws.size() == 6 * 6);
  }
  SUBCASE("summaries match a direct computation") {
    const auto r = monte_carlo(c, 5, table_suite());
    const auto v = r.values("two_stage", "overall");
    double m = 0.0;
    for (double x : v) m += x / 5.0;
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    const auto& s = r.find("two_stage", "overall");
    CHECK(s.mean == doctest::Approx(m).epsilon(1e-12));
    CHECK(s.sd == doctest::Approx(std::sqrt(ss / 4.0)).epsilon(1e-12));
    CHECK(r.find("stacked", "capped:4").n == 5);
  }
  SUBCASE("failures are recorded per replication") {
    std::vector<SuiteEntry> suite = table_suite();
    suite.push_back({"flaky", [](const Panel& p) -> Estimate {
                       if (p.outcome(0) > 0.0) throw std::runtime_error("positive first outcome");
                       Estimate e;
                       e.estimand = "overall";
                       e.point = Eigen::VectorXd::Constant(1, 1.0);
                       e.vcov.matrix = Eigen::MatrixXd::Zero(1, 1);
                       return e;
                     }});
    const auto r = monte_carlo(c, 8, suite);
    std::size_t nan = 0;
    for (double x : r.values("flaky", "overall")) nan += std::isnan(x) ? 1 : 0;
    CHECK(nan == r.failures.size());
    for (const auto& f : r.failures) CHECK(f.estimator == "flaky");
  }
  SUBCASE("event-study suite reports one draw per term") {
    const auto r = monte_carlo(c, 2, event_study_suite(EventStudySpec{1, 4, true}));
    CHECK(r.find("two_stage_event_study", "r=-1").n == 2);
    CHECK(r.find("naive_event_study", "r=4").n == 2);
  }
}
