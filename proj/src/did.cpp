#include <array>

#include "stagger/error.hpp"
#include "stagger/estimators.hpp"
#include "stagger/fixed_effects.hpp"

namespace stagger {

Estimate did_regression(const Panel& panel, FeLevel fe) {
  const auto rows = all_rows(panel);
  DesignSpec spec;
  spec.factors.push_back(level_factor(panel, rows, fe));
  spec.factors.push_back(time_factor(panel, rows));
  spec.regressors.push_back({"D", treatment_of(panel, rows)});
  const auto fit = wls_fit(spec, outcomes_of(panel, rows), weights_of(panel, rows));
  const auto vc = cluster_vcov(fit, clusters_of(panel, rows));
  const std::array<Eigen::Index, 1> idx{fit.index_of("D")};

  Estimate e;
  e.method = "did";
  e.estimand = "did";
  e.terms = {"att"};
  e.point = Eigen::VectorXd::Constant(1, fit.coefficients(idx[0]));
  e.vcov = vc.subset(idx);
  e.vcov.labels = e.terms;
  e.n_obs = fit.n_obs;
  e.n_clusters = vc.n_clusters;
  e.warnings = panel.warnings();
  return e;
}

Estimate naive_event_study(const Panel& panel, const EventStudySpec& spec, FeLevel fe) {
  const auto fam = event_family(panel, spec);
  DesignSpec design;
  design.factors.push_back(level_factor(panel, fam.rows, fe));
  design.factors.push_back(time_factor(panel, fam.rows));
  const auto n = static_cast<Eigen::Index>(fam.rows.size());
  for (std::size_t j = 0; j < fam.rel_times.size(); ++j) {
    Eigen::VectorXd col = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) {
      if (fam.index[static_cast<std::size_t>(k)] == static_cast<int>(j)) col(k) = 1.0;
    }
    design.regressors.push_back({"r=" + std::to_string(fam.rel_times[j]), std::move(col)});
  }
  const auto fit = wls_fit(design, outcomes_of(panel, fam.rows), weights_of(panel, fam.rows));
  const auto vc = cluster_vcov(fit, clusters_of(panel, fam.rows));
  std::vector<Eigen::Index> idx;
  const auto k = static_cast<Eigen::Index>(fit.labels.size());
  const auto m = static_cast<Eigen::Index>(fam.rel_times.size());
  for (Eigen::Index j = k - m; j < k; ++j) idx.push_back(j);

  Estimate e;
  e.method = "naive_event_study";
  e.estimand = "event_study";
  for (int r : fam.rel_times) e.terms.push_back("r=" + std::to_string(r));
  e.rel_times = fam.rel_times;
  e.point = fit.coefficients.tail(m);
  e.vcov = vc.subset(idx);
  e.n_obs = fit.n_obs;
  e.n_clusters = vc.n_clusters;
  e.warnings = panel.warnings();
  return e;
}

}  // namespace stagger
