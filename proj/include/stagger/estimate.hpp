#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stagger/regression.hpp"

namespace stagger {

// Target of a treatment-effect estimator: the average over all treated
// cohort x time cells, or the average of each cohort's first `horizon`
// duration effects.
struct Estimand {
  enum class Kind { overall, capped };
  Kind kind = Kind::overall;
  int horizon = 0;

  static Estimand overall() { return {}; }
  static Estimand capped(int horizon) { return {Kind::capped, horizon}; }
  std::string label() const { return kind == Kind::overall ? "overall" : "capped:" + std::to_string(horizon); }
  // Parses "overall" or "capped:P".
  static Estimand parse(const std::string& text);
};

enum class FirstStage {
  untreated,   // FE from untreated rows only
  interacted,  // full sample, FE plus treatment x time interactions
  saturated,   // full sample, FE plus one dummy per non-first-stage cell
};

enum class SeMethod { gmm, naive };

const char* to_string(FirstStage fs) noexcept;
FirstStage parse_first_stage(const std::string& text);

// Leads r = -leads..0 and durations 1..max_duration. With cap_durations the
// rows with r > max_duration leave the sample; otherwise each longer observed
// duration gets its own indicator. Rows with r < -leads and never-treated rows
// form the omitted baseline.
struct EventStudySpec {
  int leads = 1;
  int max_duration = 1;
  bool cap_durations = false;
};

struct Estimate {
  std::string method;
  std::string estimand;
  std::vector<std::string> terms;
  std::vector<int> rel_times;  // event studies only, aligned with terms
  Eigen::VectorXd point;
  Vcov vcov;
  std::size_t n_obs = 0;
  std::size_t n_clusters = 0;
  std::vector<std::string> warnings;

  double value(Eigen::Index i = 0) const { return point(i); }
  double se(Eigen::Index i = 0) const { return vcov.se(i); }
  // Coefficient at relative time r; throws if absent.
  Eigen::Index index_of_rel(int r) const;
};

struct EffectCell {
  int cohort = 0;    // cohort index
  int adoption = 0;  // adoption time of the cohort
  int time = 0;
  int rel_time = 0;
  double beta = 0.0;
  double share = 0.0;  // P(g,p | D = 1)
  double weight_sum = 0.0;
};

// Cohort x time treatment effects and their joint covariance.
struct EffectGrid {
  std::vector<EffectCell> cells;
  Eigen::MatrixXd cov;

  const EffectCell* find(int adoption, int time) const;
};

}  // namespace stagger
