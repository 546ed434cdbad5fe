#include <array>
#include <map>

#include "stagger/error.hpp"
#include "stagger/estimators.hpp"
#include "stagger/fixed_effects.hpp"

namespace stagger {

namespace {

struct StackedRow {
  int dataset;
  std::size_t obs;
  bool treated;
};

}  // namespace

Estimate stacked_did(const Panel& panel, const StackedOptions& options) {
  if (options.pre < 1 || options.post < 1) {
    throw Error(ErrorKind::InvalidInput, "stacked windows need at least one pre and one post period");
  }
  if (panel.n_cohorts() == 0) throw Error(ErrorKind::NoTreatedCells, "panel has no treated cohort");

  std::vector<StackedRow> stack;
  for (std::size_t g = 1; g <= panel.n_cohorts(); ++g) {
    const int a = panel.cohorts()[g - 1];
    const int lo = a - options.pre;
    const int hi = a + options.post - 1;
    auto is_control = [&](int cohort) {
      if (cohort == 0) return true;
      return options.not_yet_treated_controls && panel.cohorts()[static_cast<std::size_t>(cohort - 1)] > hi;
    };
    std::map<int, double> treated_w, control_w;
    for (std::size_t i = 0; i < panel.size(); ++i) {
      const int t = panel.time(i);
      if (t < lo || t > hi) continue;
      const int c = panel.cohort_index(i);
      if (c == static_cast<int>(g)) {
        treated_w[t] += panel.weight(i);
        stack.push_back({static_cast<int>(g - 1), i, t >= a});
      } else if (is_control(c)) {
        control_w[t] += panel.weight(i);
        stack.push_back({static_cast<int>(g - 1), i, false});
      }
    }
    for (int t = lo; t <= hi; ++t) {
      if (treated_w[t] <= 0.0) {
        throw Error(ErrorKind::WindowUnavailable, "cohort adopting at " + std::to_string(a) + " is not observed at time " +
                                                      std::to_string(t) + " of window [" + std::to_string(lo) + ", " +
                                                      std::to_string(hi) + "]");
      }
      if (control_w[t] <= 0.0) {
        throw Error(ErrorKind::WindowUnavailable, "cohort adopting at " + std::to_string(a) +
                                                      " has no control units at time " + std::to_string(t));
      }
    }
  }

  // Dataset x level and dataset x time effects, each with dense codes.
  Factor level{"dataset x " + std::string(options.fe == FeLevel::unit ? "unit" : "cohort"), {}, {}, {}};
  Factor time{"dataset x time", {}, {}, {}};
  std::map<std::pair<int, int>, int> level_code, time_code;
  const auto n = static_cast<Eigen::Index>(stack.size());
  Eigen::VectorXd y(n), w(n), d(n);
  std::vector<int> clusters;
  clusters.reserve(stack.size());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& s = stack[static_cast<std::size_t>(k)];
    const std::string prefix = std::to_string(panel.cohorts()[static_cast<std::size_t>(s.dataset)]) + ":";
    const int lv = options.fe == FeLevel::unit ? panel.unit_index(s.obs) : panel.cohort_index(s.obs);
    auto [li, l_new] = level_code.try_emplace({s.dataset, lv}, static_cast<int>(level_code.size()));
    if (l_new) {
      level.level_labels.push_back(prefix + (options.fe == FeLevel::unit ? panel.unit_labels()[static_cast<std::size_t>(lv)]
                                                                         : cohort_name(panel, lv)));
    }
    level.codes.push_back(li->second);
    auto [ti, t_new] = time_code.try_emplace({s.dataset, panel.time(s.obs)}, static_cast<int>(time_code.size()));
    if (t_new) {
      time.level_labels.push_back(prefix + std::to_string(panel.time(s.obs)));
      time.block.push_back(s.dataset);
    }
    time.codes.push_back(ti->second);
    y(k) = panel.outcome(s.obs);
    w(k) = panel.weight(s.obs);
    d(k) = s.treated ? 1.0 : 0.0;
    clusters.push_back(panel.cluster_index(s.obs));
  }

  DesignSpec spec;
  spec.factors = {std::move(level), std::move(time)};
  spec.regressors.push_back({"D", d});
  const auto fit = wls_fit(spec, y, w);
  const auto vc = cluster_vcov(fit, clusters);
  const std::array<Eigen::Index, 1> idx{fit.index_of("D")};

  Estimate e;
  e.method = "stacked";
  e.estimand = Estimand::capped(options.post).label();
  e.terms = {"att"};
  e.point = Eigen::VectorXd::Constant(1, fit.coefficients(idx[0]));
  e.vcov = vc.subset(idx);
  e.vcov.labels = e.terms;
  e.n_obs = fit.n_obs;
  e.n_clusters = vc.n_clusters;
  e.warnings = panel.warnings();
  return e;
}

}  // namespace stagger
