#pragma once

// Command implementations behind the `stagger` executable. Each cmd_* returns
// a report; run_cli parses arguments, prints the human table and writes the
// machine-readable files.

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "stagger/diagnostics.hpp"
#include "stagger/estimate.hpp"
#include "stagger/simulation.hpp"

namespace stagger {

struct PanelSource {
  std::string csv;     // path; empty uses the preset
  std::string preset;  // simulated panel
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::uint64_t rep = 0;
  std::string cluster_column;
  std::vector<int> exclude_cohorts;
  bool keep_always_treated = false;
};

struct RunReport {
  std::string command;
  std::size_t n_rows = 0;
  std::size_t n_units = 0;
  std::size_t n_times = 0;
  std::string cohort_summary;  // e.g. "never:35 4:5 5:5 6:5"
  std::vector<Estimate> estimates;
  std::optional<WeightDecomposition> weights;
  std::optional<MCResult> mc;
  std::optional<TrueEstimands> truth;
  std::vector<std::string> warnings;
};

struct EstimateRequest {
  PanelSource source;
  std::vector<std::string> methods{"two-stage"};  // did, two-stage, aggregated, stacked
  Estimand estimand = Estimand::overall();
  FirstStage first_stage = FirstStage::untreated;
  bool naive_se = false;
  FeLevel fe = FeLevel::unit;
  int stacked_pre = 1;
  bool not_yet_treated_controls = false;
};
RunReport cmd_estimate(const EstimateRequest& request);

struct EventStudyRequest {
  PanelSource source;
  std::vector<std::string> methods{"two-stage"};  // naive, two-stage, aggregated
  EventStudySpec spec;
  FirstStage first_stage = FirstStage::untreated;
  bool leads_in_first_stage = false;
  bool naive_se = false;
  FeLevel fe = FeLevel::unit;
};
RunReport cmd_event_study(const EventStudyRequest& request);

RunReport cmd_weights(const PanelSource& source);

struct SimulateRequest {
  std::string preset = "sim1";
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::size_t reps = 250;
  std::string suite = "table";  // table, event-study, all
  int horizon = 4;
  int stacked_pre = 2;
  EventStudySpec event_study{1, 4, false};
  std::size_t threads = 0;
};
RunReport cmd_simulate(const SimulateRequest& request);

// Returns the process exit code: 0 on success, 1 on a fatal error, 2 on a
// usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace stagger
