#include "stagger/panel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <utility>

#include "stagger/error.hpp"

namespace stagger {

namespace {

template <typename T>
std::vector<T> sorted_unique(std::vector<T> values) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  return values;
}

template <typename T>
int index_of(const std::vector<T>& sorted, const T& value) {
  return static_cast<int>(std::lower_bound(sorted.begin(), sorted.end(), value) - sorted.begin());
}

}  // namespace

std::size_t Panel::treated_count() const {
  return static_cast<std::size_t>(std::count(treated_.begin(), treated_.end(), char{1}));
}

double Panel::total_weight() const {
  double total = 0.0;
  for (const auto& o : obs_) total += o.weight;
  return total;
}

Panel Panel::with_outcomes(std::span<const double> outcomes) const {
  if (outcomes.size() != obs_.size()) {
    throw Error(ErrorKind::InvalidInput, "outcome vector length does not match panel size");
  }
  Panel copy = *this;
  for (std::size_t i = 0; i < obs_.size(); ++i) copy.obs_[i].outcome = outcomes[i];
  return copy;
}

Panel validate_panel(std::vector<Observation> raw, const Requirements& requirements) {
  if (raw.empty()) throw Error(ErrorKind::EmptySample, "panel has no observations");

  std::vector<Violation> violations;
  std::set<std::pair<std::string, int>> keys;
  std::map<std::string, std::optional<int>> adoption_of;
  bool positive_weight = false;

  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto& o = raw[i];
    if (o.unit.empty()) {
      violations.push_back({ErrorKind::InvalidInput, "row " + std::to_string(i + 1) + " has an empty unit id"});
    }
    if (!std::isfinite(o.outcome)) {
      violations.push_back({ErrorKind::InvalidInput, "row " + std::to_string(i + 1) + " has a non-finite outcome"});
    }
    if (!std::isfinite(o.weight) || o.weight < 0.0) {
      violations.push_back({ErrorKind::InvalidInput, "row " + std::to_string(i + 1) + " has a negative or non-finite weight"});
    }
    if (o.weight > 0.0) positive_weight = true;
    if (!keys.emplace(o.unit, o.time).second) {
      violations.push_back({ErrorKind::DuplicateKey,
                            "unit '" + o.unit + "' appears twice at time " + std::to_string(o.time)});
    }
    auto [it, inserted] = adoption_of.emplace(o.unit, o.adoption);
    if (!inserted && it->second != o.adoption) {
      violations.push_back({ErrorKind::InconsistentAdoption,
                            "unit '" + o.unit + "' has more than one adoption time (treatment must be absorbing)"});
    }
  }
  if (!positive_weight) {
    violations.push_back({ErrorKind::InvalidInput, "no observation has positive weight"});
  }
  if (!violations.empty()) throw PanelError(std::move(violations));

  Panel panel;
  panel.requirements_ = requirements;

  const int first_time =
      std::min_element(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.time < b.time; })->time;
  std::set<std::string> always;
  for (const auto& [unit, adoption] : adoption_of) {
    if (adoption && *adoption <= first_time) always.insert(unit);
  }
  panel.always_treated_.assign(always.begin(), always.end());
  if (!always.empty()) {
    std::string list;
    for (const auto& u : always) list += (list.empty() ? "" : ", ") + u;
    if (requirements.keep_always_treated) {
      panel.warnings_.push_back("units treated at the first sample time kept (no identified effects): " + list);
    } else {
      panel.warnings_.push_back("dropped units treated at the first sample time: " + list);
      std::erase_if(raw, [&](const Observation& o) { return always.count(o.unit) > 0; });
      if (raw.empty()) throw Error(ErrorKind::EmptySample, "no observations remain after dropping always-treated units");
      if (std::none_of(raw.begin(), raw.end(), [](const auto& o) { return o.weight > 0.0; })) {
        throw Error(ErrorKind::InvalidInput, "no observation with positive weight remains");
      }
    }
  }

  std::vector<std::string> units;
  std::vector<std::string> clusters;
  std::vector<int> times;
  std::vector<int> adoptions;
  for (auto& o : raw) {
    if (o.cluster.empty()) o.cluster = o.unit;
    units.push_back(o.unit);
    clusters.push_back(o.cluster);
    times.push_back(o.time);
    if (o.adoption) adoptions.push_back(*o.adoption);
  }
  panel.unit_labels_ = sorted_unique(std::move(units));
  panel.cluster_labels_ = sorted_unique(std::move(clusters));
  panel.times_ = sorted_unique(std::move(times));
  panel.cohorts_ = sorted_unique(std::move(adoptions));

  const std::size_t n = raw.size();
  panel.unit_.resize(n);
  panel.time_idx_.resize(n);
  panel.cohort_.resize(n);
  panel.cluster_.resize(n);
  panel.treated_.resize(n);
  panel.rel_.resize(n);
  panel.unit_cohort_.assign(panel.unit_labels_.size(), 0);

  for (std::size_t i = 0; i < n; ++i) {
    const auto& o = raw[i];
    panel.unit_[i] = index_of(panel.unit_labels_, o.unit);
    panel.time_idx_[i] = index_of(panel.times_, o.time);
    panel.cluster_[i] = index_of(panel.cluster_labels_, o.cluster);
    if (o.adoption) {
      panel.cohort_[i] = index_of(panel.cohorts_, *o.adoption) + 1;
      panel.treated_[i] = o.time >= *o.adoption ? 1 : 0;
      panel.rel_[i] = relative_time(*o.adoption, o.time);
    }
    panel.unit_cohort_[panel.unit_[i]] = panel.cohort_[i];
  }

  // Structural checks over cohorts.
  const std::size_t n_groups = panel.cohorts_.size() + 1;
  std::vector<std::set<int>> cohort_times(n_groups);
  std::vector<double> cohort_weight(n_groups, 0.0);
  std::vector<char> cohort_untreated(n_groups, 0);
  std::vector<char> time_untreated(panel.times_.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    const int g = panel.cohort_[i];
    cohort_times[g].insert(panel.time_idx_[i]);
    cohort_weight[g] += raw[i].weight;
    if (!panel.treated_[i] && raw[i].weight > 0.0) {
      cohort_untreated[g] = 1;
      time_untreated[panel.time_idx_[i]] = 1;
    }
  }
  for (std::size_t g = 0; g < n_groups; ++g) {
    const std::string name = g == 0 ? std::string("never-treated group")
                                    : "cohort adopting at " + std::to_string(panel.cohorts_[g - 1]);
    if (g > 0 || !cohort_times[0].empty()) {
      const auto& ts = cohort_times[g];
      if (!ts.empty() && static_cast<std::size_t>(*ts.rbegin() - *ts.begin() + 1) != ts.size()) {
        violations.push_back({ErrorKind::NonContiguousCohort, name + " is not observed over a contiguous set of times"});
      }
      if (g > 0 && cohort_weight[g] <= 0.0) {
        violations.push_back({ErrorKind::EmptyCohort, name + " has no observation with positive weight"});
      }
    }
    if (g > 0 && requirements.pre_period_each_cohort && !cohort_untreated[g]) {
      violations.push_back({ErrorKind::NoUntreatedObservations, name + " has no pre-treatment observation"});
    }
  }
  if (requirements.untreated_each_time) {
    for (std::size_t t = 0; t < panel.times_.size(); ++t) {
      if (!time_untreated[t]) {
        violations.push_back({ErrorKind::NoUntreatedObservations,
                              "time " + std::to_string(panel.times_[t]) + " has no untreated observation"});
      }
    }
  }
  if (requirements.never_treated && cohort_times[0].empty()) {
    violations.push_back({ErrorKind::NoUntreatedObservations, "panel has no never-treated units"});
  }
  if (!violations.empty()) throw PanelError(std::move(violations));

  panel.obs_ = std::move(raw);
  return panel;
}

std::vector<std::optional<int>> derive_relative_time(const Panel& panel) {
  std::vector<std::optional<int>> out(panel.size());
  for (std::size_t i = 0; i < panel.size(); ++i) out[i] = panel.relative_time(i);
  return out;
}

Panel drop_cohorts(const Panel& panel, std::span<const int> adoption_times) {
  std::vector<Observation> kept;
  kept.reserve(panel.size());
  for (const auto& o : panel.observations()) {
    const bool excluded =
        o.adoption && std::find(adoption_times.begin(), adoption_times.end(), *o.adoption) != adoption_times.end();
    if (!excluded) kept.push_back(o);
  }
  return validate_panel(std::move(kept), panel.requirements());
}

CellGrid cell_means(const Panel& panel) {
  CellGrid grid;
  grid.times = panel.times();
  grid.n_cohorts = panel.n_cohorts() + 1;
  const std::size_t n_times = grid.times.size();
  grid.cells.resize(grid.n_cohorts * n_times);
  for (std::size_t g = 0; g < grid.n_cohorts; ++g) {
    for (std::size_t t = 0; t < n_times; ++t) {
      auto& c = grid.cells[g * n_times + t];
      c.cohort = static_cast<int>(g);
      c.time = grid.times[t];
      c.treated = g > 0 && grid.times[t] >= panel.cohorts()[g - 1];
    }
  }
  std::vector<double> weighted_sum(grid.cells.size(), 0.0);
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const std::size_t k = static_cast<std::size_t>(panel.cohort_index(i)) * n_times + panel.time_index(i);
    grid.cells[k].count += 1;
    grid.cells[k].weight_sum += panel.weight(i);
    weighted_sum[k] += panel.weight(i) * panel.outcome(i);
  }
  for (std::size_t k = 0; k < grid.cells.size(); ++k) {
    auto& c = grid.cells[k];
    c.mean = c.weight_sum > 0.0 ? weighted_sum[k] / c.weight_sum : 0.0;
  }
  return grid;
}

}  // namespace stagger
