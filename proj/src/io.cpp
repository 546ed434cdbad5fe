#include "stagger/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>

#include "json.hpp"
#include "stagger/error.hpp"
#include "stagger/format.hpp"

namespace stagger {

namespace {

constexpr double kZ95 = 1.96;

// One CSV record; double quotes delimit fields that contain commas or quotes.
std::vector<std::string> split_record(const std::string& line, std::size_t row) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char c = line[k];
    if (quoted) {
      if (c == '"' && k + 1 < line.size() && line[k + 1] == '"') {
        cur += '"';
        ++k;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(ErrorKind::ParseError, "row " + std::to_string(row) + ": unterminated quote");
  fields.push_back(std::move(cur));
  return fields;
}

[[noreturn]] void bad(std::size_t row, const std::string& column, const std::string& what) {
  throw Error(ErrorKind::ParseError, "row " + std::to_string(row) + ", column '" + column + "': " + what);
}

int parse_int(const std::string& s, std::size_t row, const std::string& column) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) bad(row, column, "expected an integer, got '" + s + "'");
  return v;
}

double parse_real(const std::string& s, std::size_t row, const std::string& column) {
  double v = 0.0;
  const char* first = s.data();
  if (!s.empty() && s[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, s.data() + s.size(), v, std::chars_format::general);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    bad(row, column, "expected a finite decimal number, got '" + s + "'");
  }
  return v;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::vector<Observation> read_panel_csv(std::istream& in, const CsvOptions& options) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::ParseError, "row 1: missing header");
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_record(line, 1);
  std::map<std::string, std::size_t> col;
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (!col.emplace(header[k], k).second) bad(1, header[k], "duplicate column name");
  }
  for (const char* required : {"unit", "time", "y"}) {
    if (!col.count(required)) bad(1, required, "required column is missing");
  }
  auto optional_col = [&](const std::string& name) -> std::ptrdiff_t {
    auto it = col.find(name);
    return it == col.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
  };
  const std::ptrdiff_t adopt_col = optional_col("first_treat");
  const std::ptrdiff_t weight_col = optional_col("weight");
  std::ptrdiff_t cluster_col = optional_col("cluster");
  std::string cluster_name = "cluster";
  if (!options.cluster_column.empty()) {
    cluster_col = optional_col(options.cluster_column);
    cluster_name = options.cluster_column;
    if (cluster_col < 0) bad(1, options.cluster_column, "cluster column not found in header");
  }

  std::vector<Observation> rows;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_record(line, row);
    if (f.size() != header.size()) {
      throw Error(ErrorKind::ParseError, "row " + std::to_string(row) + ": expected " + std::to_string(header.size()) +
                                             " fields, found " + std::to_string(f.size()));
    }
    Observation o;
    o.unit = f[col["unit"]];
    if (o.unit.empty()) bad(row, "unit", "empty unit identifier");
    o.time = parse_int(f[col["time"]], row, "time");
    o.outcome = parse_real(f[col["y"]], row, "y");
    if (adopt_col >= 0 && !f[static_cast<std::size_t>(adopt_col)].empty()) {
      o.adoption = parse_int(f[static_cast<std::size_t>(adopt_col)], row, "first_treat");
    }
    if (cluster_col >= 0) {
      o.cluster = f[static_cast<std::size_t>(cluster_col)];
      if (o.cluster.empty()) bad(row, cluster_name, "empty cluster identifier");
    }
    if (weight_col >= 0 && !f[static_cast<std::size_t>(weight_col)].empty()) {
      o.weight = parse_real(f[static_cast<std::size_t>(weight_col)], row, "weight");
      if (o.weight < 0.0) bad(row, "weight", "weights must be >= 0");
    }
    rows.push_back(std::move(o));
  }
  return rows;
}

std::vector<Observation> read_panel_csv_file(const std::string& path, const CsvOptions& options) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, "cannot open '" + path + "'");
  return read_panel_csv(in, options);
}

void write_panel_csv(std::ostream& os, const std::vector<Observation>& rows) {
  os << "unit,time,y,first_treat,cluster,weight\n";
  for (const auto& o : rows) {
    os << quote(o.unit) << ',' << o.time << ',' << fmt17(o.outcome) << ',';
    if (o.adoption) os << *o.adoption;
    os << ',' << quote(o.cluster.empty() ? o.unit : o.cluster) << ',' << fmt17(o.weight) << '\n';
  }
}

void write_estimates_csv(std::ostream& os, const std::vector<Estimate>& estimates) {
  os << "method,estimand,term,rel_time,estimate,se,ci_low,ci_high,n_obs,n_clusters\n";
  for (const auto& e : estimates) {
    for (Eigen::Index j = 0; j < e.point.size(); ++j) {
      const auto k = static_cast<std::size_t>(j);
      os << e.method << ',' << e.estimand << ',' << quote(e.terms[k]) << ',';
      if (k < e.rel_times.size()) os << e.rel_times[k];
      os << ',' << fmt17(e.value(j)) << ',' << fmt17(e.se(j)) << ',' << fmt17(e.value(j) - kZ95 * e.se(j)) << ','
         << fmt17(e.value(j) + kZ95 * e.se(j)) << ',' << e.n_obs << ',' << e.n_clusters << '\n';
    }
  }
}

std::string estimates_json(const std::vector<Estimate>& estimates) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& e : estimates) {
    nlohmann::json j;
    j["method"] = e.method;
    j["estimand"] = e.estimand;
    j["n_obs"] = e.n_obs;
    j["n_clusters"] = e.n_clusters;
    j["terms"] = e.terms;
    if (!e.rel_times.empty()) j["rel_times"] = e.rel_times;
    std::vector<double> point(e.point.data(), e.point.data() + e.point.size());
    std::vector<double> se;
    for (Eigen::Index k = 0; k < e.point.size(); ++k) se.push_back(e.se(k));
    j["estimate"] = point;
    j["se"] = se;
    std::vector<std::vector<double>> vcov;
    for (Eigen::Index r = 0; r < e.vcov.matrix.rows(); ++r) {
      vcov.emplace_back();
      for (Eigen::Index c = 0; c < e.vcov.matrix.cols(); ++c) vcov.back().push_back(e.vcov.matrix(r, c));
    }
    j["vcov"] = vcov;
    j["warnings"] = e.warnings;
    out.push_back(std::move(j));
  }
  return out.dump(2);
}

void write_event_study_csv(std::ostream& os, const std::vector<Estimate>& estimates) {
  os << "method,rel_time,estimate,se,ci_low,ci_high\n";
  for (const auto& e : estimates) {
    for (std::size_t k = 0; k < e.rel_times.size(); ++k) {
      const auto j = static_cast<Eigen::Index>(k);
      os << e.method << ',' << e.rel_times[k] << ',' << fmt17(e.value(j)) << ',' << fmt17(e.se(j)) << ','
         << fmt17(e.value(j) - kZ95 * e.se(j)) << ',' << fmt17(e.value(j) + kZ95 * e.se(j)) << '\n';
    }
  }
}

void write_mc_draws_csv(std::ostream& os, const MCResult& result) {
  os << "rep,estimator,estimand,value,se\n";
  for (const auto& d : result.draws) {
    os << d.rep << ',' << d.estimator << ',' << quote(d.estimand) << ',' << fmt17(d.value) << ',' << fmt17(d.se) << '\n';
  }
}

void write_mc_summary_csv(std::ostream& os, const MCResult& result) {
  os << "estimator,estimand,n,mean,sd,mean_se,sd_undefined\n";
  for (const auto& s : result.summary) {
    os << s.estimator << ',' << quote(s.estimand) << ',' << s.n << ',' << fmt17(s.mean) << ',' << fmt17(s.sd) << ','
       << fmt17(s.mean_se) << ',' << (s.sd_undefined ? 1 : 0) << '\n';
  }
}

std::string mc_summary_json(const MCResult& result, const TrueEstimands& truth) {
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(config_json(result.config));
  j["reps"] = result.reps;
  j["true"] = {{"overall", truth.overall},
               {"capped", truth.capped},
               {"horizon", truth.horizon},
               {"by_duration", truth.by_duration}};
  auto& rows = j["summary"] = nlohmann::json::array();
  for (const auto& s : result.summary) {
    rows.push_back({{"estimator", s.estimator},
                    {"estimand", s.estimand},
                    {"n", s.n},
                    {"mean", s.mean},
                    {"sd", s.sd},
                    {"mean_se", s.mean_se},
                    {"sd_undefined", s.sd_undefined}});
  }
  auto& fails = j["failures"] = nlohmann::json::array();
  for (const auto& f : result.failures) {
    fails.push_back({{"rep", f.rep}, {"estimator", f.estimator}, {"message", f.message}});
  }
  return j.dump(2);
}

}  // namespace stagger
