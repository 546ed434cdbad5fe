#include <set>

#include "stagger/error.hpp"
#include "stagger/estimators.hpp"
#include "stagger/gmm.hpp"

namespace stagger {

namespace {

Estimate run_two_stage(const Panel& panel, const TwoStageSpec& spec, SeMethod se) {
  const auto design = make_two_stage_design(panel, spec);

  const auto first_rows = masked_rows(design.first_mask);
  const Design first{design.first(first_rows, Eigen::all), design.first_labels};
  const auto fit1 = wls_fit(first, design.outcome(first_rows), design.weights(first_rows));
  const Eigen::VectorXd adjusted =
      design.outcome - design.first.leftCols(design.n_fe) * fit1.coefficients.head(design.n_fe);

  const auto second_rows = masked_rows(design.second_mask);
  const Design second{design.second(second_rows, Eigen::all), design.second_labels};
  const auto fit2 = wls_fit(second, adjusted(second_rows), design.weights(second_rows));

  Estimate e;
  e.point = fit2.coefficients;
  e.terms = design.second_labels;
  e.rel_times = design.rel_times;
  if (se == SeMethod::naive) {
    std::vector<int> clusters;
    for (auto k : second_rows) clusters.push_back(design.clusters[static_cast<std::size_t>(k)]);
    e.vcov = cluster_vcov(fit2, clusters);
  } else {
    Eigen::VectorXd theta(fit1.coefficients.size() + fit2.coefficients.size());
    theta << fit1.coefficients, fit2.coefficients;
    e.vcov = sandwich_vcov(build_moment_system(design), theta).beta_vcov();
  }

  std::set<int> clusters;
  for (Eigen::Index k = 0; k < design.weights.size(); ++k) {
    const bool used = design.first_mask(k) > 0.0 || design.second_mask(k) > 0.0;
    if (used && design.weights(k) > 0.0) {
      ++e.n_obs;
      clusters.insert(design.clusters[static_cast<std::size_t>(k)]);
    }
  }
  e.n_clusters = clusters.size();
  e.warnings = panel.warnings();
  return e;
}

}  // namespace

Estimate two_stage_did(const Panel& panel, const TwoStageOptions& options) {
  TwoStageSpec spec;
  spec.estimand = options.estimand;
  spec.first_stage = options.first_stage;
  spec.fe = options.fe;
  auto e = run_two_stage(panel, spec, options.se);
  e.method = "two_stage";
  e.estimand = options.estimand.label();
  e.terms = {"att"};
  e.vcov.labels = e.terms;
  return e;
}

Estimate two_stage_event_study(const Panel& panel, const EventStudySpec& es, const TwoStageEventStudyOptions& options) {
  TwoStageSpec spec;
  spec.event_study = es;
  spec.first_stage = options.first_stage;
  spec.leads_in_first_stage = options.leads_in_first_stage;
  spec.fe = options.fe;
  auto e = run_two_stage(panel, spec, options.se);
  e.method = "two_stage_event_study";
  e.estimand = "event_study";
  return e;
}

}  // namespace stagger
