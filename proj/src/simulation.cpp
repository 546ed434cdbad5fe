#include "stagger/simulation.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "json.hpp"
#include "stagger/error.hpp"
#include "stagger/estimators.hpp"
#include "stagger/parallel.hpp"

namespace stagger {

namespace {

class NormalStream {
 public:
  NormalStream(std::uint64_t seed, std::uint64_t rep, std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32), stream};
    engine_.seed(seq);
  }

  double next() {
    // u1 in (0, 1], u2 in [0, 1)
    const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
    const double u2 = static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

std::vector<double> effect_path(int which) {
  switch (which) {
    case 0: return {2.0, 4.0, 6.0, 8.0};
    case 1: return {1.0, 2.0, 3.0, 4.0};
    default: return {0.5, 1.0, 3.0, 3.5};
  }
}

SimConfig three_cohort_design(const std::string& name, int never_treated, std::vector<int> sizes) {
  SimConfig c;
  c.name = name;
  c.never_treated = never_treated;
  for (int k = 0; k < 3; ++k) c.cohorts.push_back({4 + k, sizes[static_cast<std::size_t>(k)], effect_path(k)});
  return c;
}

}  // namespace

void SimConfig::validate() const {
  auto fail = [](const std::string& m) { throw Error(ErrorKind::ConfigError, m); };
  if (n_times < 2) fail("n_times must be at least 2");
  if (never_treated < 0) fail("never_treated must be >= 0");
  if (!(noise_sd >= 0.0 && unit_sd >= 0.0 && time_sd >= 0.0)) fail("standard deviations must be >= 0");
  int units = never_treated;
  for (const auto& c : cohorts) {
    if (c.adoption < first_time || c.adoption > last_time()) {
      fail("adoption time " + std::to_string(c.adoption) + " outside [" + std::to_string(first_time) + ", " +
           std::to_string(last_time()) + "]");
    }
    if (c.size < 1) fail("cohort adopting at " + std::to_string(c.adoption) + " needs at least one unit");
    if (c.effects.empty()) fail("cohort adopting at " + std::to_string(c.adoption) + " has an empty effect path");
    units += c.size;
  }
  if (units < 1) fail("configuration has no units");
}

SimConfig preset(const std::string& name) {
  if (name == "sim1") return three_cohort_design("sim1", 35, {5, 5, 5});
  if (name == "sim2") return three_cohort_design("sim2", 20, {5, 15, 10});
  throw Error(ErrorKind::ConfigError, "unknown preset '" + name + "' (expected sim1 or sim2)");
}

std::vector<std::string> preset_names() { return {"sim1", "sim2"}; }

SimConfig parse_config(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("invalid JSON: ") + e.what());
  }
  SimConfig c;
  try {
    c.name = j.value("name", std::string("custom"));
    c.never_treated = j.at("never_treated").get<int>();
    c.n_times = j.value("n_times", c.n_times);
    c.first_time = j.value("first_time", c.first_time);
    c.noise_sd = j.value("noise_sd", c.noise_sd);
    c.unit_sd = j.value("unit_sd", c.unit_sd);
    c.time_sd = j.value("time_sd", c.time_sd);
    c.seed = j.value("seed", c.seed);
    for (const auto& k : j.at("cohorts")) {
      c.cohorts.push_back({k.at("adoption").get<int>(), k.at("size").get<int>(),
                           k.at("effects").get<std::vector<double>>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("bad configuration: ") + e.what());
  }
  c.validate();
  return c;
}

SimConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open configuration '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string config_json(const SimConfig& config) {
  nlohmann::json j;
  j["name"] = config.name;
  j["never_treated"] = config.never_treated;
  j["n_times"] = config.n_times;
  j["first_time"] = config.first_time;
  j["noise_sd"] = config.noise_sd;
  j["unit_sd"] = config.unit_sd;
  j["time_sd"] = config.time_sd;
  j["seed"] = config.seed;
  j["cohorts"] = nlohmann::json::array();
  for (const auto& c : config.cohorts) {
    j["cohorts"].push_back({{"adoption", c.adoption}, {"size", c.size}, {"effects", c.effects}});
  }
  return j.dump(2);
}

double effect_at(const CohortConfig& cohort, int duration) {
  if (duration < 1) return 0.0;
  const auto k = std::min(static_cast<std::size_t>(duration), cohort.effects.size());
  return cohort.effects[k - 1];
}

std::vector<Observation> simulate_observations(const SimConfig& config, std::uint64_t rep) {
  config.validate();
  struct UnitSpec {
    std::optional<int> adoption;
    const CohortConfig* cohort;
  };
  std::vector<UnitSpec> units(static_cast<std::size_t>(config.never_treated), UnitSpec{std::nullopt, nullptr});
  for (const auto& c : config.cohorts) {
    for (int k = 0; k < c.size; ++k) units.push_back({c.adoption, &c});
  }

  NormalStream unit_draws(config.seed, rep, 0), time_draws(config.seed, rep, 1), noise(config.seed, rep, 2);
  std::vector<double> lambda(units.size()), gamma(static_cast<std::size_t>(config.n_times));
  for (auto& l : lambda) l = config.unit_sd * unit_draws.next();
  for (auto& g : gamma) g = config.time_sd * time_draws.next();

  std::vector<Observation> rows;
  rows.reserve(units.size() * gamma.size());
  for (std::size_t u = 0; u < units.size(); ++u) {
    char label[32];
    std::snprintf(label, sizeof label, "u%03zu", u + 1);
    for (int k = 0; k < config.n_times; ++k) {
      const int t = config.first_time + k;
      double y = lambda[u] + gamma[static_cast<std::size_t>(k)] + config.noise_sd * noise.next();
      if (units[u].adoption && t >= *units[u].adoption) {
        y += effect_at(*units[u].cohort, relative_time(*units[u].adoption, t));
      }
      rows.push_back({label, t, y, units[u].adoption, "", 1.0});
    }
  }
  return rows;
}

Panel simulate_panel(const SimConfig& config, std::uint64_t rep) {
  return validate_panel(simulate_observations(config, rep));
}

TrueEstimands true_estimands(const SimConfig& config, int horizon) {
  config.validate();
  TrueEstimands out;
  out.horizon = horizon;
  double sum_all = 0.0, n_all = 0.0, sum_cap = 0.0, n_cap = 0.0;
  std::map<int, std::pair<double, double>> by_r;
  for (const auto& c : config.cohorts) {
    for (int t = c.adoption; t <= config.last_time(); ++t) {
      const int r = relative_time(c.adoption, t);
      const double b = effect_at(c, r);
      sum_all += c.size * b;
      n_all += c.size;
      if (r <= horizon) {
        sum_cap += c.size * b;
        n_cap += c.size;
      }
      by_r[r].first += c.size * b;
      by_r[r].second += c.size;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.overall = n_all > 0.0 ? sum_all / n_all : nan;
  out.capped = n_cap > 0.0 ? sum_cap / n_cap : nan;
  for (const auto& [r, s] : by_r) out.by_duration.push_back(s.first / s.second);
  return out;
}

std::vector<SuiteEntry> table_suite(int horizon, int stacked_pre) {
  const auto capped = Estimand::capped(horizon);
  std::vector<SuiteEntry> suite;
  suite.push_back({"did", [](const Panel& p) { return did_regression(p); }});
  suite.push_back({"aggregated", [](const Panel& p) { return aggregated_att(p).estimate; }});
  suite.push_back({"aggregated", [capped](const Panel& p) { return aggregated_att(p, capped).estimate; }});
  suite.push_back({"two_stage", [](const Panel& p) { return two_stage_did(p); }});
  suite.push_back({"two_stage", [capped](const Panel& p) {
                     TwoStageOptions o;
                     o.estimand = capped;
                     return two_stage_did(p, o);
                   }});
  suite.push_back({"stacked", [horizon, stacked_pre](const Panel& p) {
                     StackedOptions o;
                     o.pre = stacked_pre;
                     o.post = horizon;
                     return stacked_did(p, o);
                   }});
  return suite;
}

std::vector<SuiteEntry> event_study_suite(const EventStudySpec& spec) {
  std::vector<SuiteEntry> suite;
  suite.push_back({"naive_event_study", [spec](const Panel& p) { return naive_event_study(p, spec); }});
  suite.push_back({"aggregated_event_study", [spec](const Panel& p) { return aggregated_event_study(p, spec); }});
  suite.push_back({"two_stage_event_study", [spec](const Panel& p) { return two_stage_event_study(p, spec); }});
  suite.push_back({"two_stage_event_study_leads_in_first_stage", [spec](const Panel& p) {
                     TwoStageEventStudyOptions o;
                     o.leads_in_first_stage = true;
                     return two_stage_event_study(p, spec, o);
                   }});
  return suite;
}

const Summary& MCResult::find(const std::string& estimator, const std::string& estimand) const {
  for (const auto& s : summary) {
    if (s.estimator == estimator && s.estimand == estimand) return s;
  }
  throw Error(ErrorKind::InvalidInput, "no Monte Carlo summary for " + estimator + " / " + estimand);
}

std::vector<double> MCResult::values(const std::string& estimator, const std::string& estimand) const {
  std::vector<double> out(reps, std::numeric_limits<double>::quiet_NaN());
  for (const auto& d : draws) {
    if (d.estimator == estimator && d.estimand == estimand) out[d.rep] = d.value;
  }
  return out;
}

std::vector<Summary> summarize(const std::vector<Draw>& draws) {
  std::vector<Summary> out;
  std::map<std::pair<std::string, std::string>, std::size_t> slot;
  std::vector<std::vector<const Draw*>> members;
  for (const auto& d : draws) {
    auto [it, inserted] = slot.try_emplace({d.estimator, d.estimand}, out.size());
    if (inserted) {
      out.push_back({d.estimator, d.estimand});
      members.emplace_back();
    }
    members[it->second].push_back(&d);
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    auto& s = out[k];
    s.n = members[k].size();
    double sum = 0.0, sum_se = 0.0;
    for (const auto* d : members[k]) {
      sum += d->value;
      sum_se += d->se;
    }
    s.mean = sum / static_cast<double>(s.n);
    s.mean_se = sum_se / static_cast<double>(s.n);
    if (s.n < 2) {
      s.sd = 0.0;
      s.sd_undefined = true;
    } else {
      double ss = 0.0;
      for (const auto* d : members[k]) ss += (d->value - s.mean) * (d->value - s.mean);
      s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
  }
  return out;
}

MCResult monte_carlo(const SimConfig& config, std::size_t reps, const std::vector<SuiteEntry>& suite,
                     std::size_t threads) {
  if (reps < 1) throw Error(ErrorKind::ConfigError, "reps must be >= 1");
  config.validate();
  std::vector<std::vector<Draw>> per_rep(reps);
  std::vector<std::vector<Failure>> failed(reps);
  parallel_for(reps, threads == 0 ? default_threads() : threads, [&](std::size_t rep) {
    std::optional<Panel> panel;
    try {
      panel = simulate_panel(config, rep);
    } catch (const std::exception& e) {
      failed[rep].push_back({rep, "simulate", e.what()});
      return;
    }
    for (const auto& entry : suite) {
      try {
        const auto est = entry.run(*panel);
        if (est.rel_times.empty() && est.point.size() == 1) {
          per_rep[rep].push_back({rep, entry.estimator, est.estimand, est.value(0), est.se(0)});
        } else {
          for (Eigen::Index j = 0; j < est.point.size(); ++j) {
            per_rep[rep].push_back(
                {rep, entry.estimator, est.terms[static_cast<std::size_t>(j)], est.value(j), est.se(j)});
          }
        }
      } catch (const std::exception& e) {
        failed[rep].push_back({rep, entry.estimator, e.what()});
      }
    }
  });

  MCResult out;
  out.config = config;
  out.reps = reps;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    out.draws.insert(out.draws.end(), per_rep[rep].begin(), per_rep[rep].end());
    out.failures.insert(out.failures.end(), failed[rep].begin(), failed[rep].end());
  }
  out.summary = summarize(out.draws);
  return out;
}

}  // namespace stagger
