#include "stagger/regression.hpp"

#include <map>

#include "stagger/error.hpp"
#include "stagger/fixed_effects.hpp"

namespace stagger {

namespace {

constexpr double kRankTolerance = 1e-10;

std::vector<char> dropped_levels(const Factor& f, bool keep_all) {
  const std::size_t n_levels = f.level_labels.size();
  std::vector<char> dropped(n_levels, 0);
  if (keep_all) return dropped;
  std::vector<char> present(n_levels, 0);
  for (int c : f.codes) present[static_cast<std::size_t>(c)] = 1;
  if (f.block.empty()) {
    for (std::size_t l = 0; l < n_levels; ++l) {
      if (present[l]) {
        dropped[l] = 1;
        break;
      }
    }
    return dropped;
  }
  std::map<int, bool> block_done;
  for (std::size_t l = 0; l < n_levels; ++l) {
    if (present[l] && !block_done[f.block[l]]) {
      dropped[l] = 1;
      block_done[f.block[l]] = true;
    }
  }
  return dropped;
}

}  // namespace

Design build_design(const DesignSpec& spec) {
  Eigen::Index n = -1;
  auto check_rows = [&n](Eigen::Index rows, const std::string& what) {
    if (n < 0) n = rows;
    if (rows != n) throw Error(ErrorKind::InvalidInput, what + " has a different number of rows");
  };
  for (const auto& f : spec.factors) {
    check_rows(static_cast<Eigen::Index>(f.codes.size()), "factor '" + f.name + "'");
    if (!f.block.empty() && f.block.size() != f.level_labels.size()) {
      throw Error(ErrorKind::InvalidInput, "factor '" + f.name + "' block map has the wrong length");
    }
    for (int c : f.codes) {
      if (c < 0 || static_cast<std::size_t>(c) >= f.level_labels.size()) {
        throw Error(ErrorKind::InvalidInput, "factor '" + f.name + "' has an out-of-range code");
      }
    }
  }
  for (const auto& r : spec.regressors) check_rows(r.values.size(), "regressor '" + r.name + "'");
  if (n < 0) throw Error(ErrorKind::InvalidInput, "design has no columns");

  Design d;
  std::vector<std::vector<Eigen::Index>> column_of(spec.factors.size());
  Eigen::Index k = spec.intercept ? 1 : 0;
  if (spec.intercept) d.labels.emplace_back("(Intercept)");
  for (std::size_t fi = 0; fi < spec.factors.size(); ++fi) {
    const auto& f = spec.factors[fi];
    const auto dropped = dropped_levels(f, fi == 0 && !spec.intercept);
    column_of[fi].assign(f.level_labels.size(), -1);
    for (std::size_t l = 0; l < f.level_labels.size(); ++l) {
      if (dropped[l]) continue;
      column_of[fi][l] = k++;
      d.labels.push_back(f.name + "[" + f.level_labels[l] + "]");
    }
  }
  for (const auto& r : spec.regressors) {
    d.labels.push_back(r.name);
    ++k;
  }

  d.X = Eigen::MatrixXd::Zero(n, k);
  if (spec.intercept) d.X.col(0).setOnes();
  for (std::size_t fi = 0; fi < spec.factors.size(); ++fi) {
    const auto& f = spec.factors[fi];
    for (Eigen::Index i = 0; i < n; ++i) {
      const Eigen::Index col = column_of[fi][static_cast<std::size_t>(f.codes[static_cast<std::size_t>(i)])];
      if (col >= 0) d.X(i, col) = 1.0;
    }
  }
  Eigen::Index col = k - static_cast<Eigen::Index>(spec.regressors.size());
  for (const auto& r : spec.regressors) d.X.col(col++) = r.values;
  return d;
}

Eigen::Index FitResult::index_of(const std::string& label) const {
  for (std::size_t j = 0; j < labels.size(); ++j) {
    if (labels[j] == label) return static_cast<Eigen::Index>(j);
  }
  throw Error(ErrorKind::InvalidInput, "no coefficient labelled '" + label + "'");
}

FitResult wls_fit(const Design& design, const Eigen::VectorXd& y, const Eigen::VectorXd& weights) {
  const Eigen::MatrixXd& X = design.X;
  const Eigen::Index n = X.rows();
  const Eigen::Index k = X.cols();
  if (y.size() != n || weights.size() != n) {
    throw Error(ErrorKind::InvalidInput, "outcome/weight length does not match the design");
  }
  if (k == 0) throw Error(ErrorKind::InvalidInput, "design has no columns");
  const auto n_pos = static_cast<Eigen::Index>((weights.array() > 0.0).count());
  if (n_pos == 0) throw Error(ErrorKind::EmptySample, "no observation with positive weight");
  if (n_pos < k) {
    throw Error(ErrorKind::RankDeficient, "design has " + std::to_string(k) + " columns but only " +
                                              std::to_string(n_pos) + " weighted observations");
  }

  const Eigen::VectorXd sw = weights.cwiseSqrt();
  const Eigen::MatrixXd Xw = sw.asDiagonal() * X;
  const Eigen::VectorXd yw = sw.cwiseProduct(y);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(k, k).triangularView<Eigen::Upper>();
  const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(R).singularValues();
  const double tol = kRankTolerance * sv(0);
  Eigen::Index rank = 0;
  for (Eigen::Index j = 0; j < sv.size(); ++j) {
    if (sv(j) > tol) ++rank;
  }
  if (rank < k) {
    std::string names;
    const auto& perm = qr.colsPermutation().indices();
    for (Eigen::Index j = rank; j < k; ++j) {
      if (!names.empty()) names += ", ";
      names += design.labels[static_cast<std::size_t>(perm(j))];
    }
    throw Error(ErrorKind::RankDeficient, "collinear columns: " + names);
  }

  FitResult fit;
  fit.coefficients = qr.solve(yw);
  fit.fitted = X * fit.coefficients;
  fit.residuals = y - fit.fitted;
  const Eigen::MatrixXd R_inv =
      R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(k, k));
  const Eigen::MatrixXd inv_permuted = R_inv * R_inv.transpose();
  const auto& P = qr.colsPermutation();
  fit.xtx_inverse = P * inv_permuted * P.transpose();
  fit.labels = design.labels;
  fit.n_obs = static_cast<std::size_t>(n_pos);
  fit.dof = n_pos - k;
  fit.design = X;
  fit.weights = weights;
  return fit;
}

FitResult wls_fit(const DesignSpec& spec, const Eigen::VectorXd& y, const Eigen::VectorXd& weights) {
  return wls_fit(build_design(spec), y, weights);
}

Vcov Vcov::subset(std::span<const Eigen::Index> indices) const {
  Vcov out;
  const auto m = static_cast<Eigen::Index>(indices.size());
  out.matrix.resize(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    out.labels.push_back(labels[static_cast<std::size_t>(indices[static_cast<std::size_t>(a)])]);
    for (Eigen::Index b = 0; b < m; ++b) {
      out.matrix(a, b) = matrix(indices[static_cast<std::size_t>(a)], indices[static_cast<std::size_t>(b)]);
    }
  }
  out.n_clusters = n_clusters;
  out.adjustment = adjustment;
  return out;
}

Vcov cluster_vcov(const FitResult& fit, std::span<const int> clusters) {
  const Eigen::Index n = fit.design.rows();
  const Eigen::Index k = fit.design.cols();
  if (static_cast<Eigen::Index>(clusters.size()) != n) {
    throw Error(ErrorKind::InvalidInput, "cluster vector length does not match the fit");
  }
  std::map<int, Eigen::Index> dense;
  std::vector<Eigen::Index> code(static_cast<std::size_t>(n), -1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (fit.weights(i) <= 0.0) continue;
    auto [it, inserted] = dense.emplace(clusters[static_cast<std::size_t>(i)], static_cast<Eigen::Index>(dense.size()));
    code[static_cast<std::size_t>(i)] = it->second;
  }
  const auto G = static_cast<Eigen::Index>(dense.size());
  if (G < 2) throw Error(ErrorKind::TooFewClusters, "cluster-robust covariance needs at least 2 clusters");

  Eigen::MatrixXd scores = Eigen::MatrixXd::Zero(G, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index c = code[static_cast<std::size_t>(i)];
    if (c < 0) continue;
    scores.row(c) += (fit.weights(i) * fit.residuals(i)) * fit.design.row(i);
  }
  const Eigen::MatrixXd meat = scores.transpose() * scores;
  const auto N = static_cast<double>(fit.n_obs);
  const double adj = (static_cast<double>(G) / static_cast<double>(G - 1)) *
                     ((N - 1.0) / (N - static_cast<double>(k)));
  Eigen::MatrixXd V = fit.xtx_inverse * meat * fit.xtx_inverse * adj;
  Vcov out;
  out.matrix = 0.5 * (V + V.transpose());
  out.labels = fit.labels;
  out.n_clusters = static_cast<std::size_t>(G);
  out.adjustment = adj;
  return out;
}

bool is_balanced(const Panel& panel) {
  const std::size_t U = panel.n_units();
  const std::size_t T = panel.n_times();
  if (panel.size() != U * T) return false;
  std::vector<double> w(U * T, -1.0);
  for (std::size_t i = 0; i < panel.size(); ++i) {
    w[static_cast<std::size_t>(panel.unit_index(i)) * T + panel.time_index(i)] = panel.weight(i);
  }
  std::vector<double> wu(U, 0.0), wt(T, 0.0);
  double total = 0.0;
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t t = 0; t < T; ++t) {
      const double x = w[u * T + t];
      if (x < 0.0) return false;
      wu[u] += x;
      wt[t] += x;
      total += x;
    }
  }
  for (std::size_t u = 0; u < U; ++u) {
    for (std::size_t t = 0; t < T; ++t) {
      const double lhs = w[u * T + t] * total;
      const double rhs = wu[u] * wt[t];
      if (std::abs(lhs - rhs) > 1e-12 * std::max(std::abs(lhs), std::abs(rhs)) + 1e-300) return false;
    }
  }
  return true;
}

Eigen::VectorXd double_demean(const Panel& panel) {
  if (!is_balanced(panel)) {
    throw Error(ErrorKind::UnbalancedPanel,
                "closed-form double demeaning needs every unit at every time with product-form weights");
  }
  const std::size_t G = panel.n_cohorts() + 1;
  const std::size_t T = panel.n_times();
  std::vector<double> wg(G, 0.0), dg(G, 0.0), wt(T, 0.0), dt(T, 0.0);
  double w_all = 0.0, d_all = 0.0;
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const double w = panel.weight(i);
    const double d = panel.treated(i) ? w : 0.0;
    wg[static_cast<std::size_t>(panel.cohort_index(i))] += w;
    dg[static_cast<std::size_t>(panel.cohort_index(i))] += d;
    wt[static_cast<std::size_t>(panel.time_index(i))] += w;
    dt[static_cast<std::size_t>(panel.time_index(i))] += d;
    w_all += w;
    d_all += d;
  }
  const double p_d = d_all / w_all;
  Eigen::VectorXd out(static_cast<Eigen::Index>(panel.size()));
  for (std::size_t i = 0; i < panel.size(); ++i) {
    const auto g = static_cast<std::size_t>(panel.cohort_index(i));
    const auto t = static_cast<std::size_t>(panel.time_index(i));
    const double p_dg = wg[g] > 0.0 ? dg[g] / wg[g] : 0.0;
    const double p_dt = wt[t] > 0.0 ? dt[t] / wt[t] : 0.0;
    out(static_cast<Eigen::Index>(i)) = (panel.treated(i) ? 1.0 : 0.0) - p_dg - (p_dt - p_d);
  }
  return out;
}

Eigen::VectorXd residualize_treatment(const Panel& panel, FeLevel level) {
  const auto rows = all_rows(panel);
  DesignSpec spec;
  spec.factors.push_back(level_factor(panel, rows, level));
  spec.factors.push_back(time_factor(panel, rows));
  const auto fit = wls_fit(spec, treatment_of(panel, rows), weights_of(panel, rows));
  return fit.residuals;
}

}  // namespace stagger
