#pragma once

// Long-format panel model: one row per (unit, time) with an optional
// adoption time. Treatment is absorbing, so D = 1 exactly when the unit has
// adopted by `time`.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace stagger {

struct Observation {
  std::string unit;
  int time = 0;
  double outcome = 0.0;
  std::optional<int> adoption;  // first treated time; empty = never treated
  std::string cluster;          // empty = cluster on unit
  double weight = 1.0;
};

// Which categorical variable carries the permanent effect in FE designs.
enum class FeLevel { unit, cohort };

// Optional identification requirements checked by validate_panel.
struct Requirements {
  bool untreated_each_time = false;     // every time has an untreated row
  bool pre_period_each_cohort = false;  // every cohort has an untreated row
  bool never_treated = false;           // at least one never-treated unit
  // Units treated at the first sample time have no identified effects and are
  // dropped unless this is set, in which case they stay in the panel.
  bool keep_always_treated = false;

  static Requirements two_stage() {
    Requirements r;
    r.untreated_each_time = true;
    r.pre_period_each_cohort = true;
    return r;
  }
};

// r = time - adoption + 1: r >= 1 are treated durations, r <= 0 are leads.
constexpr int relative_time(int adoption, int time) noexcept { return time - adoption + 1; }

class Panel {
 public:
  std::size_t size() const noexcept { return obs_.size(); }
  const std::vector<Observation>& observations() const noexcept { return obs_; }
  const Observation& observation(std::size_t i) const { return obs_[i]; }

  double outcome(std::size_t i) const { return obs_[i].outcome; }
  double weight(std::size_t i) const { return obs_[i].weight; }
  int time(std::size_t i) const { return obs_[i].time; }

  int unit_index(std::size_t i) const { return unit_[i]; }
  int time_index(std::size_t i) const { return time_idx_[i]; }
  // 0 = never treated, g >= 1 = cohort adopting at cohorts()[g - 1].
  int cohort_index(std::size_t i) const { return cohort_[i]; }
  int cluster_index(std::size_t i) const { return cluster_[i]; }
  bool treated(std::size_t i) const { return treated_[i] != 0; }
  std::optional<int> relative_time(std::size_t i) const { return rel_[i]; }

  const std::vector<int>& times() const noexcept { return times_; }
  const std::vector<int>& cohorts() const noexcept { return cohorts_; }
  const std::vector<std::string>& unit_labels() const noexcept { return unit_labels_; }
  const std::vector<std::string>& cluster_labels() const noexcept { return cluster_labels_; }
  std::size_t n_units() const noexcept { return unit_labels_.size(); }
  std::size_t n_times() const noexcept { return times_.size(); }
  std::size_t n_cohorts() const noexcept { return cohorts_.size(); }
  std::size_t n_clusters() const noexcept { return cluster_labels_.size(); }
  // Cohort index of each unit (0 = never treated).
  const std::vector<int>& unit_cohorts() const noexcept { return unit_cohort_; }

  const Requirements& requirements() const noexcept { return requirements_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  // Units dropped (or kept, if requested) because they were treated at the first time.
  const std::vector<std::string>& always_treated_units() const noexcept { return always_treated_; }

  std::size_t treated_count() const;
  double total_weight() const;

  // Same design with replaced outcomes (length must match).
  Panel with_outcomes(std::span<const double> outcomes) const;

 private:
  friend Panel validate_panel(std::vector<Observation> raw, const Requirements& requirements);

  std::vector<Observation> obs_;
  std::vector<int> unit_, time_idx_, cohort_, cluster_;
  std::vector<char> treated_;
  std::vector<std::optional<int>> rel_;
  std::vector<int> times_, cohorts_, unit_cohort_;
  std::vector<std::string> unit_labels_, cluster_labels_;
  Requirements requirements_;
  std::vector<std::string> warnings_, always_treated_;
};

// Validates raw rows and derives cohort/time/treatment structure. Throws
// PanelError listing every violated requirement.
Panel validate_panel(std::vector<Observation> raw, const Requirements& requirements = {});

// Relative time for every row; never-treated rows carry no value.
std::vector<std::optional<int>> derive_relative_time(const Panel& panel);

// Re-validates the panel without the cohorts adopting at the given times.
Panel drop_cohorts(const Panel& panel, std::span<const int> adoption_times);

struct Cell {
  int cohort = 0;  // cohort index, 0 = never treated
  int time = 0;    // calendar time
  std::size_t count = 0;
  double weight_sum = 0.0;
  double mean = 0.0;  // weighted mean outcome, 0 when the cell is empty
  bool treated = false;
};

// Cohort x time grid of weighted mean outcomes, row-major by cohort.
struct CellGrid {
  std::vector<int> times;
  std::size_t n_cohorts = 0;  // including the never-treated group
  std::vector<Cell> cells;

  const Cell& at(std::size_t cohort, std::size_t time_index) const {
    return cells[cohort * times.size() + time_index];
  }
};

CellGrid cell_means(const Panel& panel);

}  // namespace stagger
