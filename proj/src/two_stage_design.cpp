#include "stagger/two_stage_design.hpp"

#include <map>
#include <set>

#include "stagger/error.hpp"

namespace stagger {

namespace {

std::string rel_label(int r) { return "r=" + std::to_string(r); }

}  // namespace

std::vector<Eigen::Index> masked_rows(const Eigen::VectorXd& mask) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    if (mask(i) > 0.0) out.push_back(i);
  }
  return out;
}

EventFamily event_family(const Panel& panel, const EventStudySpec& spec) {
  if (spec.leads < 0) throw Error(ErrorKind::InvalidInput, "number of leads must be >= 0");
  if (spec.max_duration < 1) throw Error(ErrorKind::InvalidInput, "maximum duration must be >= 1");

  EventFamily fam;
  std::map<int, double> weight_at;  // r -> weight among sample rows
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto r = panel.relative_time(i);
    if (r && spec.cap_durations && *r > spec.max_duration) continue;
    fam.rows.push_back(static_cast<RowIndex>(i));
    if (r && *r >= -spec.leads) weight_at[*r] += panel.weight(i);
  }
  for (int r = -spec.leads; r <= spec.max_duration; ++r) {
    auto it = weight_at.find(r);
    if (it == weight_at.end() || it->second <= 0.0) {
      throw Error(ErrorKind::EmptyBin, "no observations at relative time " + std::to_string(r));
    }
    fam.rel_times.push_back(r);
  }
  for (const auto& [r, w] : weight_at) {
    if (r > spec.max_duration && w > 0.0) fam.rel_times.push_back(r);
  }
  std::map<int, int> column_of;
  for (std::size_t j = 0; j < fam.rel_times.size(); ++j) column_of[fam.rel_times[j]] = static_cast<int>(j);
  fam.index.reserve(fam.rows.size());
  for (auto row : fam.rows) {
    const auto r = panel.relative_time(static_cast<std::size_t>(row));
    auto it = r ? column_of.find(*r) : column_of.end();
    fam.index.push_back(it == column_of.end() ? -1 : it->second);
  }
  return fam;
}

TwoStageDesign make_two_stage_design(const Panel& panel, const TwoStageSpec& spec) {
  if (spec.estimand.kind == Estimand::Kind::capped && spec.estimand.horizon < 1) {
    throw Error(ErrorKind::InvalidInput, "capped estimand needs a horizon >= 1");
  }
  TwoStageDesign d;
  EventFamily fam;
  const bool es = spec.event_study.has_value();
  if (es) {
    fam = event_family(panel, *spec.event_study);
    d.rows = fam.rows;
  } else {
    d.rows = all_rows(panel);
  }
  const auto n = static_cast<Eigen::Index>(d.rows.size());
  auto obs = [&](Eigen::Index k) { return static_cast<std::size_t>(d.rows[static_cast<std::size_t>(k)]); };

  // Second stage.
  d.second_mask = Eigen::VectorXd::Ones(n);
  if (es) {
    const auto m = static_cast<Eigen::Index>(fam.rel_times.size());
    d.second = Eigen::MatrixXd::Zero(n, m);
    for (Eigen::Index k = 0; k < n; ++k) {
      const int col = fam.index[static_cast<std::size_t>(k)];
      if (col >= 0) d.second(k, col) = 1.0;
    }
    for (int r : fam.rel_times) d.second_labels.push_back(rel_label(r));
    d.rel_times = fam.rel_times;
  } else {
    d.second = Eigen::MatrixXd::Zero(n, 1);
    for (Eigen::Index k = 0; k < n; ++k) {
      const std::size_t i = obs(k);
      if (!panel.treated(i)) continue;
      const bool in_window =
          spec.estimand.kind == Estimand::Kind::overall || *panel.relative_time(i) <= spec.estimand.horizon;
      if (in_window) {
        d.second(k, 0) = 1.0;
      } else {
        d.second_mask(k) = 0.0;
      }
    }
    d.second_labels.push_back("D");
  }

  // Rows the untreated-only first stage would use.
  Eigen::VectorXd untreated_mask = Eigen::VectorXd::Zero(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const std::size_t i = obs(k);
    const bool carries_lead = es && fam.index[static_cast<std::size_t>(k)] >= 0;
    if (!panel.treated(i) && (!es || spec.leads_in_first_stage || !carries_lead)) untreated_mask(k) = 1.0;
  }

  DesignSpec fe_spec;
  fe_spec.factors.push_back(level_factor(panel, d.rows, spec.fe));
  fe_spec.factors.push_back(time_factor(panel, d.rows));
  const Design fe = build_design(fe_spec);
  d.n_fe = fe.X.cols();
  d.first_labels = fe.labels;

  std::vector<Eigen::VectorXd> extra;
  if (spec.first_stage == FirstStage::untreated) {
    d.first_mask = untreated_mask;
  } else {
    d.first_mask = Eigen::VectorXd::Ones(n);
    if (spec.first_stage == FirstStage::interacted) {
      std::map<int, Eigen::VectorXd> by_time;
      for (Eigen::Index k = 0; k < n; ++k) {
        const std::size_t i = obs(k);
        if (!panel.treated(i)) continue;
        auto [it, inserted] = by_time.try_emplace(panel.time(i), Eigen::VectorXd::Zero(n));
        it->second(k) = 1.0;
      }
      for (auto& [t, col] : by_time) {
        d.first_labels.push_back("D x time[" + std::to_string(t) + "]");
        extra.push_back(std::move(col));
      }
    } else {
      std::map<std::pair<int, int>, Eigen::VectorXd> by_cell;
      for (Eigen::Index k = 0; k < n; ++k) {
        if (untreated_mask(k) > 0.0) continue;
        const std::size_t i = obs(k);
        auto [it, inserted] =
            by_cell.try_emplace({panel.cohort_index(i), panel.time(i)}, Eigen::VectorXd::Zero(n));
        it->second(k) = 1.0;
      }
      for (auto& [cell, col] : by_cell) {
        d.first_labels.push_back("cell[" + cohort_name(panel, cell.first) + "," + std::to_string(cell.second) + "]");
        extra.push_back(std::move(col));
      }
    }
  }
  d.first.resize(n, d.n_fe + static_cast<Eigen::Index>(extra.size()));
  d.first.leftCols(d.n_fe) = fe.X;
  for (std::size_t j = 0; j < extra.size(); ++j) d.first.col(d.n_fe + static_cast<Eigen::Index>(j)) = extra[j];

  d.outcome = outcomes_of(panel, d.rows);
  d.weights = weights_of(panel, d.rows);
  d.clusters = clusters_of(panel, d.rows);

  // Identification of every level and time from the first-stage rows.
  const Eigen::VectorXd first_w = d.first_mask.cwiseProduct(d.weights);
  std::vector<double> level_w(fe_spec.factors[0].level_labels.size(), 0.0);
  std::vector<char> level_seen(level_w.size(), 0);
  std::vector<double> time_w(panel.n_times(), 0.0);
  std::vector<char> time_seen(panel.n_times(), 0);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto lvl = static_cast<std::size_t>(fe_spec.factors[0].codes[static_cast<std::size_t>(k)]);
    const auto t = static_cast<std::size_t>(fe_spec.factors[1].codes[static_cast<std::size_t>(k)]);
    level_seen[lvl] = 1;
    time_seen[t] = 1;
    level_w[lvl] += first_w(k);
    time_w[t] += first_w(k);
  }
  for (std::size_t l = 0; l < level_w.size(); ++l) {
    if (level_seen[l] && level_w[l] <= 0.0) {
      throw Error(ErrorKind::UnidentifiedFixedEffect,
                  fe_spec.factors[0].name + " '" + fe_spec.factors[0].level_labels[l] +
                      "' has no first-stage (untreated) observation");
    }
  }
  for (std::size_t t = 0; t < time_w.size(); ++t) {
    if (time_seen[t] && time_w[t] <= 0.0) {
      throw Error(ErrorKind::UnidentifiedFixedEffect,
                  "time " + std::to_string(panel.times()[t]) + " has no first-stage (untreated) observation");
    }
  }
  for (Eigen::Index j = 0; j < d.second.cols(); ++j) {
    if (d.second.col(j).dot(d.weights) <= 0.0) {
      if (es) {
        throw Error(ErrorKind::EmptyBin, "indicator " + d.second_labels[static_cast<std::size_t>(j)] + " has no observations");
      }
      throw Error(ErrorKind::Unidentified, "beta: no treated observation in the second-stage sample");
    }
  }
  return d;
}

}  // namespace stagger
