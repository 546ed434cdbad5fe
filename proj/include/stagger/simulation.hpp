#pragma once

// Simulated staggered-adoption panels
//   y_it = lambda_i + gamma_t + beta_g(r) D_it + eps_it
// with normal unit, time and noise draws, plus a deterministic Monte Carlo
// harness over a suite of estimators.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "stagger/estimate.hpp"
#include "stagger/panel.hpp"

namespace stagger {

struct CohortConfig {
  int adoption = 0;
  int size = 0;
  // Effect at durations 1, 2, ...; the last entry holds for longer durations.
  std::vector<double> effects;
};

struct SimConfig {
  std::string name;
  int never_treated = 0;
  int n_times = 10;
  int first_time = 1;
  std::vector<CohortConfig> cohorts;
  double noise_sd = 1.0;
  double unit_sd = 1.0;
  double time_sd = 1.0;
  std::uint64_t seed = 20240101;

  int last_time() const { return first_time + n_times - 1; }
  // Throws ConfigError.
  void validate() const;
};

// "sim1": cohorts of 5 adopting at 4, 5, 6 with 35 never-treated units.
// "sim2": same adoption times and effect paths, cohort sizes 5, 15, 10 and
// 20 never-treated units. Both 10 periods.
SimConfig preset(const std::string& name);
std::vector<std::string> preset_names();

// JSON keys: name, never_treated, n_times, first_time, noise_sd, unit_sd,
// time_sd, seed, cohorts: [{adoption, size, effects: [...]}].
SimConfig parse_config(const std::string& json_text);
SimConfig load_config(const std::string& path);
std::string config_json(const SimConfig& config);

double effect_at(const CohortConfig& cohort, int duration);

// Streams keyed by (seed, rep, stream) with stream 0 = unit effects,
// 1 = time effects, 2 = noise. Generator: mt19937_64 seeded through
// std::seed_seq, normals by the Box-Muller cosine branch.
std::vector<Observation> simulate_observations(const SimConfig& config, std::uint64_t rep);
Panel simulate_panel(const SimConfig& config, std::uint64_t rep);

struct TrueEstimands {
  double overall = 0.0;
  int horizon = 0;
  double capped = 0.0;
  std::vector<double> by_duration;  // durations 1..max observed
};

// Unit-weighted averages of the configured effects over treated cells.
TrueEstimands true_estimands(const SimConfig& config, int horizon = 4);

struct SuiteEntry {
  std::string estimator;
  std::function<Estimate(const Panel&)> run;
};

// Overall and capped estimators shaped like a results table: DiD, aggregated,
// two-stage and stacked.
std::vector<SuiteEntry> table_suite(int horizon = 4, int stacked_pre = 2);
// Naive, aggregated and two-stage event studies (plus the two-stage variant
// whose first stage keeps lead rows).
std::vector<SuiteEntry> event_study_suite(const EventStudySpec& spec);

struct Draw {
  std::size_t rep = 0;
  std::string estimator;
  std::string estimand;  // estimand label, or the term for vector estimates
  double value = 0.0;
  double se = 0.0;
};

struct Summary {
  std::string estimator;
  std::string estimand;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;  // 1/(n-1); 0 when n == 1
  double mean_se = 0.0;
  bool sd_undefined = false;
};

struct Failure {
  std::size_t rep = 0;
  std::string estimator;
  std::string message;
};

struct MCResult {
  SimConfig config;
  std::size_t reps = 0;
  std::vector<Draw> draws;  // ordered by rep, then suite order
  std::vector<Summary> summary;
  std::vector<Failure> failures;

  const Summary& find(const std::string& estimator, const std::string& estimand) const;
  // Values ordered by rep; NaN where the rep failed.
  std::vector<double> values(const std::string& estimator, const std::string& estimand) const;
};

std::vector<Summary> summarize(const std::vector<Draw>& draws);

MCResult monte_carlo(const SimConfig& config, std::size_t reps, const std::vector<SuiteEntry>& suite,
                     std::size_t threads = 0);

}  // namespace stagger
