#include "stagger/fixed_effects.hpp"

#include <numeric>
#include <set>

namespace stagger {

std::vector<RowIndex> all_rows(const Panel& panel) {
  std::vector<RowIndex> rows(panel.size());
  std::iota(rows.begin(), rows.end(), RowIndex{0});
  return rows;
}

std::string cohort_name(const Panel& panel, int cohort_index) {
  if (cohort_index == 0) return "never";
  return std::to_string(panel.cohorts()[static_cast<std::size_t>(cohort_index - 1)]);
}

Factor level_factor(const Panel& panel, std::span<const RowIndex> rows, FeLevel level) {
  Factor f;
  f.codes.reserve(rows.size());
  if (level == FeLevel::unit) {
    f.name = "unit";
    f.level_labels = panel.unit_labels();
    for (auto i : rows) f.codes.push_back(panel.unit_index(static_cast<std::size_t>(i)));
  } else {
    f.name = "cohort";
    for (std::size_t g = 0; g <= panel.n_cohorts(); ++g) f.level_labels.push_back(cohort_name(panel, static_cast<int>(g)));
    for (auto i : rows) f.codes.push_back(panel.cohort_index(static_cast<std::size_t>(i)));
  }
  return f;
}

Factor time_factor(const Panel& panel, std::span<const RowIndex> rows) {
  Factor f;
  f.name = "time";
  for (int t : panel.times()) f.level_labels.push_back(std::to_string(t));
  f.codes.reserve(rows.size());
  for (auto i : rows) f.codes.push_back(panel.time_index(static_cast<std::size_t>(i)));
  return f;
}

Eigen::VectorXd outcomes_of(const Panel& panel, std::span<const RowIndex> rows) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) y(static_cast<Eigen::Index>(k)) = panel.outcome(static_cast<std::size_t>(rows[k]));
  return y;
}

Eigen::VectorXd weights_of(const Panel& panel, std::span<const RowIndex> rows) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) w(static_cast<Eigen::Index>(k)) = panel.weight(static_cast<std::size_t>(rows[k]));
  return w;
}

Eigen::VectorXd treatment_of(const Panel& panel, std::span<const RowIndex> rows) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    d(static_cast<Eigen::Index>(k)) = panel.treated(static_cast<std::size_t>(rows[k])) ? 1.0 : 0.0;
  }
  return d;
}

std::vector<int> clusters_of(const Panel& panel, std::span<const RowIndex> rows) {
  std::vector<int> c;
  c.reserve(rows.size());
  for (auto i : rows) c.push_back(panel.cluster_index(static_cast<std::size_t>(i)));
  return c;
}

std::size_t count_clusters(const Panel& panel, std::span<const RowIndex> rows) {
  std::set<int> seen;
  for (auto i : rows) {
    if (panel.weight(static_cast<std::size_t>(i)) > 0.0) seen.insert(panel.cluster_index(static_cast<std::size_t>(i)));
  }
  return seen.size();
}

std::size_t count_positive(const Panel& panel, std::span<const RowIndex> rows) {
  std::size_t n = 0;
  for (auto i : rows) n += panel.weight(static_cast<std::size_t>(i)) > 0.0 ? 1 : 0;
  return n;
}

}  // namespace stagger
