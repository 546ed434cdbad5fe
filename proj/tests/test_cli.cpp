#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "stagger/cli.hpp"
#include "stagger/error.hpp"
#include "stagger/estimators.hpp"
#include "stagger/io.hpp"
#include "stagger/simulation.hpp"

namespace fs = std::filesystem;
using namespace stagger;

namespace {

struct Result {
  int code = 0;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "stagger");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("stagger_cli_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

const char* kTwoByTwo = "unit,time,y,first_treat\nA,1,1,\nA,2,1.5,\nB,1,2,2\nB,2,5.5,2\n";

}  // namespace

TEST_CASE("estimate on a two-by-two CSV") {
  const auto dir = scratch("2x2");
  spit(dir / "panel.csv", kTwoByTwo);
  const auto r = run({"estimate", (dir / "panel.csv").string(), "--method", "did,two-stage,aggregated",
                      "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(slurp(dir / "out" / "estimates.csv"));
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == std::vector<std::string>{"method", "estimand", "term", "rel_time", "estimate", "se", "ci_low",
                                            "ci_high", "n_obs", "n_clusters"});
  CHECK(rows[1][0] == "did");
  for (std::size_t k = 1; k < 4; ++k) CHECK(std::stod(rows[k][4]) == doctest::Approx(3.0).epsilon(1e-12));
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "estimates.json"));
  CHECK(j["estimates"].size() == 3);
}

TEST_CASE("exported preset through the CSV path matches the library exactly") {
  const auto dir = scratch("roundtrip");
  REQUIRE(run({"generate", "--preset", "sim1", "--rep", "2", "--out", (dir / "sim1.csv").string()}).code == 0);
  const auto r = run({"estimate", (dir / "sim1.csv").string(), "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "estimates.json"));
  const auto lib = two_stage_did(simulate_panel(preset("sim1"), 2));
  CHECK(j["estimates"][0]["estimate"][0].get<double>() == lib.value());
  CHECK(j["estimates"][0]["se"][0].get<double>() == lib.se());
  const auto rows = csv_rows(slurp(dir / "out" / "estimates.csv"));
  CHECK(std::stod(rows[1][4]) == lib.value());
}

TEST_CASE("preset panels run without a CSV") {
  const auto r = run({"estimate", "--preset", "sim2", "--method", "stacked", "--estimand", "capped:4", "--pre", "2"});
  CHECK(r.code == 0);
  CHECK(r.out.find("stacked") != std::string::npos);
  CHECK(r.out.find("never:20 4:5 5:15 6:10") != std::string::npos);
}

TEST_CASE("stacked windows outside the data name the cohort") {
  const auto r = run({"estimate", "--preset", "sim1", "--method", "stacked", "--estimand", "capped:6"});
  CHECK(r.code == 1);
  CHECK(r.err.find("WindowUnavailable") != std::string::npos);
  CHECK(r.err.find("cohort adopting at 6") != std::string::npos);
  const auto s = run({"estimate", "--preset", "sim1", "--method", "stacked"});
  CHECK(s.code == 1);
  CHECK(s.err.find("capped") != std::string::npos);
}

TEST_CASE("excluding a cohort") {
  const auto dir = scratch("exclude");
  const auto r = run({"estimate", "--preset", "sim1", "--exclude-cohorts", "6", "--out", dir.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("never:35 4:5 5:5\n") != std::string::npos);
  const auto j = nlohmann::json::parse(slurp(dir / "estimates.json"));
  CHECK(j["estimates"][0]["n_obs"].get<int>() == 450);
}

TEST_CASE("event study with no leads") {
  const auto dir = scratch("es");
  const auto r = run({"event-study", "--preset", "sim1", "--leads", "0", "--durations", "4", "--cap-durations",
                      "--method", "naive,two-stage,aggregated", "--out", dir.string()});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(slurp(dir / "event_study.csv"));
  CHECK(rows[0] == std::vector<std::string>{"method", "rel_time", "estimate", "se", "ci_low", "ci_high"});
  CHECK(rows.size() == 1 + 3 * 5);
  CHECK(rows[1][1] == "0");
  const auto inc = run({"event-study", "--preset", "sim1", "--first-stage-leads", "include"});
  CHECK(inc.code == 0);
  CHECK(inc.out.find("two_stage_event_study_leads_in_first_stage") != std::string::npos);
  CHECK(run({"event-study", "--preset", "sim1", "--first-stage-leads", "maybe"}).code == 1);
}

TEST_CASE("weights subcommand") {
  const auto dir = scratch("weights");
  spit(dir / "toy.csv",
       "unit,time,y,first_treat\nn,0,0.3,\nn,1,1.0,\nn,2,-0.1,\na,0,-1,1\na,1,0.7,1\na,2,1.6,1\nb,0,2,2\nb,1,2.7,2\nb,2,4.6,2\n");
  const auto r = run({"weights", (dir / "toy.csv").string(), "--out", (dir / "out").string()});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(slurp(dir / "out" / "weights.csv"));
  REQUIRE(rows.size() == 4);
  CHECK(rows[1][0] == "1");
  CHECK(rows[1][1] == "1");
  CHECK(std::stod(rows[1][2]) == doctest::Approx(0.5));
  CHECK(std::abs(std::stod(rows[2][2])) < 1e-12);
  CHECK(std::stod(rows[3][2]) == doctest::Approx(0.5));
  const auto j = nlohmann::json::parse(slurp(dir / "out" / "weights.json"));
  CHECK(j["closed_form"].get<bool>());
}

TEST_CASE("simulate is reproducible byte for byte") {
  const auto a = scratch("sim_a");
  const auto b = scratch("sim_b");
  REQUIRE(run({"simulate", "--preset", "sim2", "--reps", "4", "--threads", "1", "--out", a.string()}).code == 0);
  REQUIRE(run({"simulate", "--preset", "sim2", "--reps", "4", "--threads", "2", "--out", b.string()}).code == 0);
  for (const char* f : {"mc_draws.csv", "mc_summary.csv", "mc_summary.json"}) {
    CAPTURE(f);
    const auto x = slurp(a / f);
    CHECK(!x.empty());
    CHECK(x == slurp(b / f));
  }
  const auto rows = csv_rows(slurp(a / "mc_draws.csv"));
  CHECK(rows[0] == std::vector<std::string>{"rep", "estimator", "estimand", "value", "se"});
  CHECK(rows.size() == 1 + 4 * 6);
  const auto other = scratch("sim_c");
  REQUIRE(run({"simulate", "--preset", "sim2", "--reps", "4", "--seed", "9", "--out", other.string()}).code == 0);
  CHECK(slurp(other / "mc_draws.csv") != slurp(a / "mc_draws.csv"));
  const auto one = run({"simulate", "--preset", "sim1", "--reps", "1"});
  CHECK(one.code == 0);
}

TEST_CASE("input errors") {
  const auto dir = scratch("errors");
  spit(dir / "bad.csv", "unit,time,y\nA,1,1\nA,two,2\n");
  const auto r = run({"estimate", (dir / "bad.csv").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("row 3") != std::string::npos);  // file line, header is row 1
  CHECK(r.err.find("column 'time'") != std::string::npos);
  spit(dir / "nohead.csv", "unit,y\nA,1\n");
  CHECK(run({"estimate", (dir / "nohead.csv").string()}).code == 1);
  CHECK(run({"estimate", (dir / "missing.csv").string()}).code == 1);
  CHECK(run({"estimate", "--preset", "sim1", "--estimand", "capped:0"}).code == 1);
  CHECK(run({"estimate", "--preset", "sim1", "--method", "magic"}).code == 1);
  CHECK(run({"simulate", "--reps", "0"}).code == 1);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == 2);
  CHECK(run({"estimate", "--no-such-flag"}).code == 2);
  CHECK(run({"bogus"}).code == 2);
  CHECK(run({"--help"}).code == 0);
}

TEST_CASE("the installed executable runs") {
  const auto dir = scratch("process");
  const std::string cmd = std::string(STAGGER_CLI_PATH) + " estimate --preset sim1 > " + (dir / "out.txt").string() + " 2>&1";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(slurp(dir / "out.txt").find("two_stage") != std::string::npos);
}
