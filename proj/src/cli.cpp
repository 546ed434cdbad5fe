#include "stagger/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "stagger/error.hpp"
#include "stagger/estimators.hpp"
#include "stagger/format.hpp"
#include "stagger/io.hpp"

namespace stagger {

namespace {

Panel load_panel(const PanelSource& source, Requirements requirements, RunReport& report) {
  std::vector<Observation> rows;
  if (!source.csv.empty()) {
    rows = read_panel_csv_file(source.csv, {source.cluster_column});
  } else if (!source.preset.empty()) {
    auto config = preset(source.preset);
    if (source.seed_set) config.seed = source.seed;
    rows = simulate_observations(config, source.rep);
  } else {
    throw Error(ErrorKind::InvalidInput, "no input: pass a CSV path or --preset");
  }
  if (!source.exclude_cohorts.empty()) {
    const std::set<int> drop(source.exclude_cohorts.begin(), source.exclude_cohorts.end());
    std::erase_if(rows, [&](const Observation& o) { return o.adoption && drop.count(*o.adoption) > 0; });
  }
  requirements.keep_always_treated = source.keep_always_treated;
  Panel panel = validate_panel(std::move(rows), requirements);

  report.n_rows = panel.size();
  report.n_units = panel.n_units();
  report.n_times = panel.n_times();
  std::vector<std::size_t> units_per_cohort(panel.n_cohorts() + 1, 0);
  for (int g : panel.unit_cohorts()) ++units_per_cohort[static_cast<std::size_t>(g)];
  std::string summary = "never:" + std::to_string(units_per_cohort[0]);
  for (std::size_t g = 1; g < units_per_cohort.size(); ++g) {
    summary += " " + std::to_string(panel.cohorts()[g - 1]) + ":" + std::to_string(units_per_cohort[g]);
  }
  report.cohort_summary = summary;
  report.warnings = panel.warnings();
  return panel;
}

void add_warnings(RunReport& report, const Estimate& e) {
  for (const auto& w : e.warnings) {
    if (std::find(report.warnings.begin(), report.warnings.end(), w) == report.warnings.end()) report.warnings.push_back(w);
  }
}

bool uses_two_stage(const std::vector<std::string>& methods) {
  return std::find(methods.begin(), methods.end(), "two-stage") != methods.end();
}

nlohmann::json report_json(const RunReport& r) {
  nlohmann::json j;
  j["command"] = r.command;
  j["input"] = {{"rows", r.n_rows}, {"units", r.n_units}, {"times", r.n_times}, {"cohorts", r.cohort_summary}};
  j["estimates"] = nlohmann::json::parse(estimates_json(r.estimates));
  j["warnings"] = r.warnings;
  return j;
}

std::ofstream open_out(const std::string& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  const auto path = std::filesystem::path(dir) / name;
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::InvalidInput, "cannot write '" + path.string() + "'");
  return os;
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s + " " : s + std::string(width - s.size(), ' ');
}

std::string lpad(const std::string& s, std::size_t width) {
  return s.size() >= width ? " " + s : std::string(width - s.size(), ' ') + s;
}

void print_fingerprint(std::ostream& out, const RunReport& r) {
  out << "rows " << r.n_rows << ", units " << r.n_units << ", times " << r.n_times << ", cohorts (adoption:units) "
      << r.cohort_summary << "\n";
}

void print_estimates(std::ostream& out, const RunReport& r) {
  print_fingerprint(out, r);
  out << pad("method", 24) << pad("estimand", 12) << lpad("estimate", 10) << lpad("se", 10) << lpad("n_obs", 8)
      << lpad("clusters", 10) << "\n";
  for (const auto& e : r.estimates) {
    out << pad(e.method, 24) << pad(e.estimand, 12) << lpad(fmt3(e.value()), 10) << lpad(fmt3(e.se()), 10)
        << lpad(std::to_string(e.n_obs), 8) << lpad(std::to_string(e.n_clusters), 10) << "\n";
  }
}

void print_event_study(std::ostream& out, const RunReport& r) {
  print_fingerprint(out, r);
  for (const auto& e : r.estimates) {
    out << e.method << " (n_obs " << e.n_obs << ", clusters " << e.n_clusters << ")\n";
    out << lpad("r", 6) << lpad("estimate", 10) << lpad("se", 10) << lpad("ci_low", 10) << lpad("ci_high", 10) << "\n";
    for (std::size_t k = 0; k < e.rel_times.size(); ++k) {
      const auto j = static_cast<Eigen::Index>(k);
      out << lpad(std::to_string(e.rel_times[k]), 6) << lpad(fmt3(e.value(j)), 10) << lpad(fmt3(e.se(j)), 10)
          << lpad(fmt3(e.value(j) - 1.96 * e.se(j)), 10) << lpad(fmt3(e.value(j) + 1.96 * e.se(j)), 10) << "\n";
    }
  }
}

void print_weights(std::ostream& out, const RunReport& r) {
  print_fingerprint(out, r);
  const auto& w = *r.weights;
  out << lpad("group", 8) << lpad("period", 8) << lpad("duration", 10) << lpad("weight", 10) << "\n";
  for (const auto& c : w.cells) {
    out << lpad(std::to_string(c.adoption), 8) << lpad(std::to_string(c.time), 8)
        << lpad(std::to_string(c.rel_time), 10) << lpad(fmt3(c.weight), 10) << "\n";
  }
  out << "sum of weights " << fmt3(w.sum()) << "; negative weights: " << w.negative_count() << " of "
      << w.cells.size() << " cells, total mass " << fmt3(w.negative_mass())
      << (w.closed_form ? "" : " (unbalanced panel: auxiliary-regression weights)") << "\n";
}

std::string cell(const MCResult& mc, const std::string& estimator, const std::string& estimand) {
  for (const auto& s : mc.summary) {
    if (s.estimator == estimator && s.estimand == estimand) return fmt3(s.mean) + " (" + fmt3(s.sd) + ")";
  }
  return "-";
}

void print_simulation(std::ostream& out, const RunReport& r, const SimulateRequest& req) {
  const auto& mc = *r.mc;
  const auto& truth = *r.truth;
  const std::string capped = Estimand::capped(req.horizon).label();
  out << mc.config.name << ", " << mc.reps << " reps, seed " << mc.config.seed << "\n";
  if (req.suite == "table" || req.suite == "all") {
    out << pad("", 14) << pad("overall", 18) << pad(capped, 18) << "\n";
    out << pad("True", 14) << pad(fmt3(truth.overall), 18) << pad(fmt3(truth.capped), 18) << "\n";
    const std::vector<std::pair<std::string, std::string>> rows{
        {"Diff-in-diff", "did"}, {"Aggregated", "aggregated"}, {"Two-stage", "two_stage"}, {"Stacked", "stacked"}};
    for (const auto& [name, key] : rows) {
      const std::string overall = key == "did" ? cell(mc, key, "did") : cell(mc, key, "overall");
      out << pad(name, 14) << pad(overall, 18) << pad(cell(mc, key, capped), 18) << "\n";
    }
  }
  if (req.suite == "event-study" || req.suite == "all") {
    std::vector<std::string> estimators;
    std::vector<std::string> terms;
    for (const auto& s : mc.summary) {
      if (s.estimand.rfind("r=", 0) != 0) continue;
      if (std::find(estimators.begin(), estimators.end(), s.estimator) == estimators.end()) estimators.push_back(s.estimator);
      if (std::find(terms.begin(), terms.end(), s.estimand) == terms.end()) terms.push_back(s.estimand);
    }
    out << pad("", 8);
    for (const auto& e : estimators) out << pad(e, 46);
    out << "\n";
    for (const auto& t : terms) {
      out << pad(t, 8);
      for (const auto& e : estimators) out << pad(cell(mc, e, t), 46);
      out << "\n";
    }
  }
  if (!mc.failures.empty()) out << mc.failures.size() << " estimator runs failed; see mc_summary.json\n";
}

std::string join_args(int argc, const char* const* argv) {
  std::string s;
  for (int k = 0; k < argc; ++k) s += (k ? " " : "") + std::string(argv[k]);
  return s;
}

FeLevel parse_fe(const std::string& s) {
  if (s == "unit") return FeLevel::unit;
  if (s == "cohort") return FeLevel::cohort;
  throw Error(ErrorKind::InvalidInput, "--fe must be unit or cohort, got '" + s + "'");
}

}  // namespace

RunReport cmd_estimate(const EstimateRequest& request) {
  RunReport report;
  const Panel panel =
      load_panel(request.source, uses_two_stage(request.methods) ? Requirements::two_stage() : Requirements{}, report);
  for (const auto& m : request.methods) {
    Estimate e;
    if (m == "did") {
      e = did_regression(panel, request.fe);
    } else if (m == "two-stage") {
      TwoStageOptions o;
      o.estimand = request.estimand;
      o.first_stage = request.first_stage;
      o.se = request.naive_se ? SeMethod::naive : SeMethod::gmm;
      o.fe = request.fe;
      e = two_stage_did(panel, o);
      if (request.naive_se) e.method = "two_stage_naive_se";
    } else if (m == "aggregated") {
      e = aggregated_att(panel, request.estimand, request.fe).estimate;
    } else if (m == "stacked") {
      if (request.estimand.kind != Estimand::Kind::capped) {
        throw Error(ErrorKind::InvalidInput, "stacked DiD estimates a capped effect; pass --estimand capped:P");
      }
      StackedOptions o;
      o.pre = request.stacked_pre;
      o.post = request.estimand.horizon;
      o.not_yet_treated_controls = request.not_yet_treated_controls;
      o.fe = request.fe;
      e = stacked_did(panel, o);
    } else {
      throw Error(ErrorKind::InvalidInput, "unknown method '" + m + "' (did, two-stage, aggregated, stacked)");
    }
    add_warnings(report, e);
    report.estimates.push_back(std::move(e));
  }
  return report;
}

RunReport cmd_event_study(const EventStudyRequest& request) {
  RunReport report;
  const Panel panel =
      load_panel(request.source, uses_two_stage(request.methods) ? Requirements::two_stage() : Requirements{}, report);
  for (const auto& m : request.methods) {
    Estimate e;
    if (m == "naive") {
      e = naive_event_study(panel, request.spec, request.fe);
    } else if (m == "two-stage") {
      TwoStageEventStudyOptions o;
      o.first_stage = request.first_stage;
      o.leads_in_first_stage = request.leads_in_first_stage;
      o.se = request.naive_se ? SeMethod::naive : SeMethod::gmm;
      o.fe = request.fe;
      e = two_stage_event_study(panel, request.spec, o);
      if (request.leads_in_first_stage) e.method += "_leads_in_first_stage";
      if (request.naive_se) e.method += "_naive_se";
    } else if (m == "aggregated") {
      e = aggregated_event_study(panel, request.spec, request.fe);
    } else {
      throw Error(ErrorKind::InvalidInput, "unknown event-study method '" + m + "' (naive, two-stage, aggregated)");
    }
    add_warnings(report, e);
    report.estimates.push_back(std::move(e));
  }
  return report;
}

RunReport cmd_weights(const PanelSource& source) {
  RunReport report;
  const Panel panel = load_panel(source, {}, report);
  report.weights = did_weights(panel);
  if (!report.weights->closed_form) report.warnings.push_back("panel is unbalanced; weights from auxiliary regressions");
  return report;
}

RunReport cmd_simulate(const SimulateRequest& request) {
  SimConfig config = request.config_path.empty() ? preset(request.preset) : load_config(request.config_path);
  if (request.seed) config.seed = *request.seed;
  std::vector<SuiteEntry> suite;
  if (request.suite == "table" || request.suite == "all") suite = table_suite(request.horizon, request.stacked_pre);
  if (request.suite == "event-study" || request.suite == "all") {
    auto es = event_study_suite(request.event_study);
    suite.insert(suite.end(), es.begin(), es.end());
  }
  if (suite.empty()) throw Error(ErrorKind::ConfigError, "suite must be table, event-study or all");
  RunReport report;
  report.mc = monte_carlo(config, request.reps, suite, request.threads);
  report.truth = true_estimands(config, request.horizon);
  const std::size_t units = static_cast<std::size_t>(config.never_treated) +
                            [&] {
                              std::size_t n = 0;
                              for (const auto& c : config.cohorts) n += static_cast<std::size_t>(c.size);
                              return n;
                            }();
  report.n_units = units;
  report.n_times = static_cast<std::size_t>(config.n_times);
  report.n_rows = units * report.n_times;
  return report;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Difference-in-differences estimators for staggered treatment adoption"};
  app.require_subcommand(1);

  PanelSource source;
  std::string out_dir;
  std::string estimand_text = "overall";
  std::string first_stage_text = "untreated";
  std::string fe_text = "unit";
  std::string first_stage_leads = "exclude";

  auto add_source = [&](CLI::App* sub) {
    sub->add_option("csv", source.csv, "Panel CSV (unit,time,y[,first_treat][,cluster][,weight])");
    sub->add_option("--preset", source.preset, "Simulated panel instead of a CSV (sim1, sim2)");
    sub->add_option("--seed", source.seed, "Seed for --preset")->each([&](const std::string&) { source.seed_set = true; });
    sub->add_option("--rep", source.rep, "Replication index for --preset");
    sub->add_option("--cluster", source.cluster_column, "Column defining clusters (default: cluster, else unit)");
    sub->add_option("--exclude-cohorts", source.exclude_cohorts, "Adoption times of cohorts to drop")->delimiter(',');
    sub->add_flag("--keep-always-treated", source.keep_always_treated, "Keep units treated at the first time");
    sub->add_option("--out", out_dir, "Directory for machine-readable outputs");
  };

  EstimateRequest est;
  est.methods.clear();
  auto* estimate = app.add_subcommand("estimate", "Point estimate and SE of an average effect");
  add_source(estimate);
  estimate->add_option("--method", est.methods, "did, two-stage, aggregated, stacked (comma list)")->delimiter(',');
  estimate->add_option("--estimand", estimand_text, "overall or capped:P");
  estimate->add_option("--first-stage", first_stage_text, "untreated, interacted or saturated");
  estimate->add_flag("--naive-se", est.naive_se, "Uncorrected second-stage SEs for two-stage");
  estimate->add_option("--fe", fe_text, "Permanent effects at unit or cohort level");
  estimate->add_option("--pre", est.stacked_pre, "Pre-periods per stacked window");
  estimate->add_flag("--not-yet-treated", est.not_yet_treated_controls, "Stacked: add not-yet-treated controls");

  EventStudyRequest es;
  es.methods.clear();
  auto* event = app.add_subcommand("event-study", "Lead and duration coefficients");
  add_source(event);
  event->add_option("--method", es.methods, "naive, two-stage, aggregated (comma list)")->delimiter(',');
  event->add_option("--leads", es.spec.leads, "Number of leads R (r = -R..0)");
  event->add_option("--durations", es.spec.max_duration, "Maximum duration P");
  event->add_flag("--cap-durations", es.spec.cap_durations, "Drop rows with r > P instead of adding indicators");
  event->add_option("--first-stage", first_stage_text, "untreated, interacted or saturated");
  event->add_option("--first-stage-leads", first_stage_leads, "exclude or include lead rows in the first stage");
  event->add_flag("--naive-se", es.naive_se, "Uncorrected second-stage SEs for two-stage");
  event->add_option("--fe", fe_text, "Permanent effects at unit or cohort level");

  auto* weights = app.add_subcommand("weights", "Implicit DiD regression weights per treated cell");
  add_source(weights);

  SimulateRequest sim;
  std::uint64_t sim_seed = 0;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo study on a simulated design");
  simulate->add_option("--preset", sim.preset, "sim1 or sim2");
  simulate->add_option("--config", sim.config_path, "JSON configuration file");
  auto* seed_opt = simulate->add_option("--seed", sim_seed, "Master seed");
  simulate->add_option("--reps", sim.reps, "Replications");
  simulate->add_option("--suite", sim.suite, "table, event-study or all");
  simulate->add_option("--horizon", sim.horizon, "P for the capped estimand");
  simulate->add_option("--stacked-pre", sim.stacked_pre, "Pre-periods per stacked window");
  simulate->add_option("--leads", sim.event_study.leads, "Event-study leads");
  simulate->add_option("--durations", sim.event_study.max_duration, "Event-study maximum duration");
  simulate->add_option("--threads", sim.threads, "Worker threads (0 = hardware)");
  simulate->add_option("--out", out_dir, "Directory for machine-readable outputs");

  std::string gen_preset = "sim1", gen_config, gen_out;
  std::uint64_t gen_seed = 0, gen_rep = 0;
  auto* generate = app.add_subcommand("generate", "Write a simulated panel as CSV");
  generate->add_option("--preset", gen_preset, "sim1 or sim2");
  generate->add_option("--config", gen_config, "JSON configuration file");
  auto* gen_seed_opt = generate->add_option("--seed", gen_seed, "Master seed");
  generate->add_option("--rep", gen_rep, "Replication index");
  generate->add_option("--out", gen_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    RunReport report;
    if (*estimate) {
      if (est.methods.empty()) est.methods = {"two-stage"};
      est.source = source;
      est.estimand = Estimand::parse(estimand_text);
      est.first_stage = parse_first_stage(first_stage_text);
      est.fe = parse_fe(fe_text);
      report = cmd_estimate(est);
      report.command = join_args(argc, argv);
      print_estimates(out, report);
      if (!out_dir.empty()) {
        open_out(out_dir, "estimates.json") << report_json(report).dump(2) << "\n";
        auto csv = open_out(out_dir, "estimates.csv");
        write_estimates_csv(csv, report.estimates);
      }
    } else if (*event) {
      if (es.methods.empty()) es.methods = {"two-stage"};
      if (first_stage_leads != "exclude" && first_stage_leads != "include") {
        throw Error(ErrorKind::InvalidInput, "--first-stage-leads must be exclude or include");
      }
      es.source = source;
      es.first_stage = parse_first_stage(first_stage_text);
      es.leads_in_first_stage = first_stage_leads == "include";
      es.fe = parse_fe(fe_text);
      report = cmd_event_study(es);
      report.command = join_args(argc, argv);
      print_event_study(out, report);
      if (!out_dir.empty()) {
        open_out(out_dir, "estimates.json") << report_json(report).dump(2) << "\n";
        auto csv = open_out(out_dir, "estimates.csv");
        write_estimates_csv(csv, report.estimates);
        auto plot = open_out(out_dir, "event_study.csv");
        write_event_study_csv(plot, report.estimates);
      }
    } else if (*weights) {
      report = cmd_weights(source);
      report.command = join_args(argc, argv);
      print_weights(out, report);
      if (!out_dir.empty()) {
        auto csv = open_out(out_dir, "weights.csv");
        write_weights_csv(csv, *report.weights);
        open_out(out_dir, "weights.json") << weights_json(*report.weights) << "\n";
      }
    } else if (*simulate) {
      if (seed_opt->count() > 0) sim.seed = sim_seed;
      report = cmd_simulate(sim);
      report.command = join_args(argc, argv);
      print_simulation(out, report, sim);
      if (!out_dir.empty()) {
        auto summary = open_out(out_dir, "mc_summary.csv");
        write_mc_summary_csv(summary, *report.mc);
        auto draws = open_out(out_dir, "mc_draws.csv");
        write_mc_draws_csv(draws, *report.mc);
        open_out(out_dir, "mc_summary.json") << mc_summary_json(*report.mc, *report.truth) << "\n";
      }
    } else if (*generate) {
      SimConfig config = gen_config.empty() ? preset(gen_preset) : load_config(gen_config);
      if (gen_seed_opt->count() > 0) config.seed = gen_seed;
      const auto rows = simulate_observations(config, gen_rep);
      if (gen_out.empty()) {
        write_panel_csv(out, rows);
      } else {
        std::ofstream os(gen_out);
        if (!os) throw Error(ErrorKind::InvalidInput, "cannot write '" + gen_out + "'");
        write_panel_csv(os, rows);
      }
    }
    for (const auto& w : report.warnings) err << "warning: " << w << "\n";
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace stagger
