#pragma once

// Row-level designs for the two-stage family. Both the sequential estimator
// and the joint moment system are built from the same TwoStageDesign, which
// keeps the two solution routes comparable row for row.

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "stagger/estimate.hpp"
#include "stagger/fixed_effects.hpp"
#include "stagger/panel.hpp"

namespace stagger {

struct TwoStageSpec {
  Estimand estimand = Estimand::overall();
  std::optional<EventStudySpec> event_study;
  FirstStage first_stage = FirstStage::untreated;
  // Event studies only: fit the first stage on every untreated row, lead rows
  // included. Off by default so that lead rows are used only once.
  bool leads_in_first_stage = false;
  FeLevel fe = FeLevel::unit;
};

struct TwoStageDesign {
  std::vector<RowIndex> rows;  // panel rows in the estimation sample

  Eigen::MatrixXd first;  // FE columns first, then any extra first-stage columns
  Eigen::Index n_fe = 0;
  Eigen::VectorXd first_mask;  // 1 for first-stage rows
  std::vector<std::string> first_labels;

  Eigen::MatrixXd second;  // indicators, zero outside the second-stage sample
  Eigen::VectorXd second_mask;
  std::vector<std::string> second_labels;
  std::vector<int> rel_times;  // event studies

  Eigen::VectorXd outcome;
  Eigen::VectorXd weights;
  std::vector<int> clusters;
};

// Indicator family of an event study over the panel's rows.
struct EventFamily {
  std::vector<RowIndex> rows;  // sample rows (long durations removed when capped)
  std::vector<int> index;      // per sample row: indicator column, -1 = baseline
  std::vector<int> rel_times;  // r of each indicator column
};

// Throws EmptyBin when a lead -leads..0 or duration 1..max_duration is unobserved.
EventFamily event_family(const Panel& panel, const EventStudySpec& spec);

// Throws UnidentifiedFixedEffect when a unit/cohort or time has no first-stage
// row, Unidentified when no row is treated, EmptyBin for an empty indicator.
TwoStageDesign make_two_stage_design(const Panel& panel, const TwoStageSpec& spec);

// Rows of `m` selected by mask > 0, with their positions.
std::vector<Eigen::Index> masked_rows(const Eigen::VectorXd& mask);

}  // namespace stagger
