#include <map>
#include <set>

#include "stagger/error.hpp"
#include "stagger/estimators.hpp"
#include "stagger/fixed_effects.hpp"

namespace stagger {

namespace {

struct CellColumn {
  int cohort = 0;
  int key = 0;  // calendar time or relative time
  Eigen::VectorXd indicator;
  double weight_sum = 0.0;
};

struct CellFit {
  FitResult fit;
  Vcov cell_vcov;
  std::vector<CellColumn> cells;
};

// Level and time effects plus one dummy per (cohort, key) among the rows
// selected by `key_of` (which returns false for rows without a dummy).
template <class KeyOf>
CellFit fit_cells(const Panel& panel, std::span<const RowIndex> rows, FeLevel fe, const std::string& prefix,
                  KeyOf key_of) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  std::map<std::pair<int, int>, std::size_t> column_of;
  CellFit out;
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto i = static_cast<std::size_t>(rows[static_cast<std::size_t>(k)]);
    int key = 0;
    if (panel.weight(i) <= 0.0 || !key_of(i, key)) continue;
    auto [it, inserted] = column_of.try_emplace({panel.cohort_index(i), key}, out.cells.size());
    if (inserted) out.cells.push_back({panel.cohort_index(i), key, Eigen::VectorXd::Zero(n), 0.0});
    auto& cell = out.cells[it->second];
    cell.indicator(k) = 1.0;
    cell.weight_sum += panel.weight(i);
  }
  if (out.cells.empty()) throw Error(ErrorKind::NoTreatedCells, "no treated cells with positive weight");
  // Column order follows (cohort, key).
  std::vector<CellColumn> ordered;
  for (const auto& [ck, j] : column_of) ordered.push_back(std::move(out.cells[j]));
  out.cells = std::move(ordered);

  DesignSpec spec;
  spec.factors.push_back(level_factor(panel, rows, fe));
  spec.factors.push_back(time_factor(panel, rows));
  for (const auto& c : out.cells) {
    spec.regressors.push_back(
        {prefix + "[" + cohort_name(panel, c.cohort) + "," + std::to_string(c.key) + "]", c.indicator});
  }
  out.fit = wls_fit(spec, outcomes_of(panel, rows), weights_of(panel, rows));
  const auto vc = cluster_vcov(out.fit, clusters_of(panel, rows));
  std::vector<Eigen::Index> idx;
  const auto k = static_cast<Eigen::Index>(out.fit.labels.size());
  const auto m = static_cast<Eigen::Index>(out.cells.size());
  for (Eigen::Index j = k - m; j < k; ++j) idx.push_back(j);
  out.cell_vcov = vc.subset(idx);
  return out;
}

}  // namespace

AggregatedResult aggregated_att(const Panel& panel, Estimand estimand, FeLevel fe) {
  const auto rows = all_rows(panel);
  auto cf = fit_cells(panel, rows, fe, "cell", [&](std::size_t i, int& key) {
    key = panel.time(i);
    return panel.treated(i);
  });

  AggregatedResult out;
  double total = 0.0;
  for (const auto& c : cf.cells) total += c.weight_sum;
  const auto m = static_cast<Eigen::Index>(cf.cells.size());
  const Eigen::VectorXd beta = cf.fit.coefficients.tail(m);
  for (std::size_t j = 0; j < cf.cells.size(); ++j) {
    const auto& c = cf.cells[j];
    EffectCell cell;
    cell.cohort = c.cohort;
    cell.adoption = panel.cohorts()[static_cast<std::size_t>(c.cohort - 1)];
    cell.time = c.key;
    cell.rel_time = relative_time(cell.adoption, c.key);
    cell.beta = beta(static_cast<Eigen::Index>(j));
    cell.weight_sum = c.weight_sum;
    cell.share = c.weight_sum / total;
    out.grid.cells.push_back(cell);
  }
  out.grid.cov = cf.cell_vcov.matrix;

  out.estimate = aggregate_grid(out.grid, estimand, cf.fit.n_obs, cf.cell_vcov.n_clusters);
  out.estimate.vcov.adjustment = cf.cell_vcov.adjustment;
  std::vector<std::string> warnings = panel.warnings();
  // Treated cells observed in the panel's calendar but without usable rows.
  for (std::size_t g = 1; g <= panel.n_cohorts(); ++g) {
    const int a = panel.cohorts()[g - 1];
    for (int t : panel.times()) {
      if (t < a || out.grid.find(a, t)) continue;
      bool cohort_present = false;
      for (std::size_t i = 0; i < panel.size() && !cohort_present; ++i) {
        cohort_present = panel.cohort_index(i) == static_cast<int>(g);
      }
      if (cohort_present) {
        warnings.push_back("treated cell (" + std::to_string(a) + "," + std::to_string(t) +
                           ") has no observations and was dropped");
      }
    }
  }
  warnings.insert(warnings.end(), out.estimate.warnings.begin(), out.estimate.warnings.end());
  out.estimate.warnings = std::move(warnings);
  return out;
}

Estimate aggregate_grid(const EffectGrid& grid, Estimand estimand, std::size_t n_obs, std::size_t n_clusters) {
  const auto m = static_cast<Eigen::Index>(grid.cells.size());
  Eigen::VectorXd w = Eigen::VectorXd::Zero(m);
  Estimate e;
  if (estimand.kind == Estimand::Kind::overall) {
    for (Eigen::Index j = 0; j < m; ++j) w(j) = grid.cells[static_cast<std::size_t>(j)].share;
  } else {
    if (estimand.horizon < 1) throw Error(ErrorKind::InvalidInput, "capped estimand needs a horizon >= 1");
    std::map<int, std::set<int>> durations;  // adoption -> durations within the horizon
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& c = grid.cells[static_cast<std::size_t>(j)];
      if (c.rel_time >= 1 && c.rel_time <= estimand.horizon) {
        w(j) = c.weight_sum;
        durations[c.adoption].insert(c.rel_time);
      }
    }
    if (w.sum() <= 0.0) {
      throw Error(ErrorKind::NoTreatedCells, "no treated cells within " + std::to_string(estimand.horizon) + " periods");
    }
    for (const auto& [a, d] : durations) {
      if (static_cast<int>(d.size()) < estimand.horizon) {
        e.warnings.push_back("cohort " + std::to_string(a) + " is observed for " + std::to_string(d.size()) + " of " +
                             std::to_string(estimand.horizon) + " durations");
      }
    }
    w /= w.sum();
  }
  Eigen::VectorXd beta(m);
  for (Eigen::Index j = 0; j < m; ++j) beta(j) = grid.cells[static_cast<std::size_t>(j)].beta;

  e.method = "aggregated";
  e.estimand = estimand.label();
  e.terms = {"att"};
  e.point = Eigen::VectorXd::Constant(1, w.dot(beta));
  e.vcov.matrix = Eigen::MatrixXd::Constant(1, 1, w.dot(grid.cov * w));
  e.vcov.labels = e.terms;
  e.vcov.n_clusters = n_clusters;
  e.n_obs = n_obs;
  e.n_clusters = n_clusters;
  return e;
}

Estimate aggregated_event_study(const Panel& panel, const EventStudySpec& spec, FeLevel fe) {
  const auto fam = event_family(panel, spec);
  std::map<RowIndex, int> column_of_row;
  for (std::size_t k = 0; k < fam.rows.size(); ++k) column_of_row[fam.rows[k]] = fam.index[k];
  auto cf = fit_cells(panel, fam.rows, fe, "cell_r", [&](std::size_t i, int& key) {
    if (column_of_row.at(static_cast<RowIndex>(i)) < 0) return false;
    key = *panel.relative_time(i);
    return true;
  });

  const auto m = static_cast<Eigen::Index>(fam.rel_times.size());
  const auto n_cells = static_cast<Eigen::Index>(cf.cells.size());
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, n_cells);
  for (Eigen::Index j = 0; j < m; ++j) {
    const int r = fam.rel_times[static_cast<std::size_t>(j)];
    double total = 0.0;
    for (Eigen::Index c = 0; c < n_cells; ++c) {
      const auto& cell = cf.cells[static_cast<std::size_t>(c)];
      if (cell.key == r) {
        W(j, c) = cell.weight_sum;
        total += cell.weight_sum;
      }
    }
    W.row(j) /= total;
  }
  const Eigen::VectorXd beta = cf.fit.coefficients.tail(n_cells);

  Estimate e;
  e.method = "aggregated_event_study";
  e.estimand = "event_study";
  for (int r : fam.rel_times) e.terms.push_back("r=" + std::to_string(r));
  e.rel_times = fam.rel_times;
  e.point = W * beta;
  Eigen::MatrixXd V = W * cf.cell_vcov.matrix * W.transpose();
  e.vcov.matrix = 0.5 * (V + V.transpose());
  e.vcov.labels = e.terms;
  e.vcov.n_clusters = cf.cell_vcov.n_clusters;
  e.vcov.adjustment = cf.cell_vcov.adjustment;
  e.n_obs = cf.fit.n_obs;
  e.n_clusters = cf.cell_vcov.n_clusters;
  e.warnings = panel.warnings();
  return e;
}

}  // namespace stagger
