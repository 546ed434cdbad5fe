#pragma once

// Treatment-effect estimators for staggered adoption designs.

#include <vector>

#include "stagger/estimate.hpp"
#include "stagger/panel.hpp"
#include "stagger/two_stage_design.hpp"

namespace stagger {

// OLS of y on level effects, time effects and D; clustered SE.
Estimate did_regression(const Panel& panel, FeLevel fe = FeLevel::unit);

struct TwoStageOptions {
  Estimand estimand = Estimand::overall();
  FirstStage first_stage = FirstStage::untreated;
  SeMethod se = SeMethod::gmm;
  FeLevel fe = FeLevel::unit;
};

// Step 1 fits level and time effects on the first-stage rows; step 2 regresses
// y - fe_hat on D (no intercept) over the second-stage sample. SEs come from
// the joint moment system unless naive SEs are requested.
Estimate two_stage_did(const Panel& panel, const TwoStageOptions& options = {});

Estimate naive_event_study(const Panel& panel, const EventStudySpec& spec, FeLevel fe = FeLevel::unit);

struct TwoStageEventStudyOptions {
  FirstStage first_stage = FirstStage::untreated;
  bool leads_in_first_stage = false;
  SeMethod se = SeMethod::gmm;
  FeLevel fe = FeLevel::unit;
};

Estimate two_stage_event_study(const Panel& panel, const EventStudySpec& spec,
                               const TwoStageEventStudyOptions& options = {});

struct AggregatedResult {
  Estimate estimate;
  EffectGrid grid;
};

// One regression with a dummy per treated cohort x time cell plus level and
// time effects. Cell effects are combined with frozen treated-share weights;
// the SE is sqrt(w'Vw) with V the clustered covariance of the cells.
AggregatedResult aggregated_att(const Panel& panel, Estimand estimand = Estimand::overall(),
                                FeLevel fe = FeLevel::unit);

// Re-weights an existing grid for another estimand without refitting.
Estimate aggregate_grid(const EffectGrid& grid, Estimand estimand, std::size_t n_obs, std::size_t n_clusters);

// Cohort x relative-time dummies for every indicator of the family, averaged
// over cohorts at each r with observation-weight shares.
Estimate aggregated_event_study(const Panel& panel, const EventStudySpec& spec, FeLevel fe = FeLevel::unit);

struct StackedOptions {
  int pre = 1;   // periods before adoption in each window
  int post = 1;  // treated periods, durations 1..post
  bool not_yet_treated_controls = false;
  FeLevel fe = FeLevel::unit;
};

// One dataset per treated cohort over [adoption - pre, adoption + post - 1]
// with never-treated (optionally not-yet-treated) controls, stacked and fitted
// with dataset x level and dataset x time effects.
Estimate stacked_did(const Panel& panel, const StackedOptions& options);

}  // namespace stagger
