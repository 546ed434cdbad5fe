#pragma once

// Panels and brute-force oracles shared by the unit tests.

#include <Eigen/Dense>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "stagger/panel.hpp"

namespace stagger::test {

inline std::string unit_name(int k) { return "u" + std::to_string(k); }

// Cohorts {never, adopting at 1, adopting at 2} over times 0..2, one unit
// each, outcomes lambda_g + gamma_t + beta on treated cells.
inline Panel toy_panel(double b11, double b12, double b22) {
  const double lambda[3] = {0.3, -1.0, 2.0};
  const double gamma[3] = {0.0, 0.7, -0.4};
  std::vector<Observation> rows;
  for (int g = 0; g < 3; ++g) {
    for (int t = 0; t < 3; ++t) {
      double y = lambda[g] + gamma[t];
      if (g == 1 && t == 1) y += b11;
      if (g == 1 && t == 2) y += b12;
      if (g == 2 && t == 2) y += b22;
      std::optional<int> a;
      if (g > 0) a = g;
      rows.push_back({unit_name(g), t, y, a, "", 1.0});
    }
  }
  return validate_panel(rows);
}

inline Panel two_by_two(double beta) {
  std::vector<Observation> rows{{"A", 1, 1.0, std::nullopt, "", 1.0},
                                {"A", 2, 1.5, std::nullopt, "", 1.0},
                                {"B", 1, 2.0, 2, "", 1.0},
                                {"B", 2, 2.5 + beta, 2, "", 1.0}};
  return validate_panel(rows);
}

struct RandomDesign {
  int n_times = 6;
  int never = 4;
  std::vector<int> adoption;  // one entry per treated unit
};

// Balanced random staggered design; every cohort has a pre-period.
inline RandomDesign random_design(std::mt19937_64& rng, int max_cohorts = 4) {
  RandomDesign d;
  std::uniform_int_distribution<int> times(4, 8);
  d.n_times = times(rng);
  std::uniform_int_distribution<int> n_never(2, 5);
  d.never = n_never(rng);
  std::uniform_int_distribution<int> n_cohorts(1, max_cohorts);
  std::uniform_int_distribution<int> adopt(2, d.n_times);
  std::uniform_int_distribution<int> size(1, 4);
  const int G = n_cohorts(rng);
  for (int g = 0; g < G; ++g) {
    const int a = adopt(rng);
    const int s = size(rng);
    for (int k = 0; k < s; ++k) d.adoption.push_back(a);
  }
  return d;
}

// Cell effect: a deterministic function of (adoption, time) plus a shift.
inline double cell_effect(int adoption, int time, double shift = 0.0) {
  return 1.0 + 0.5 * adoption - 0.3 * (time - adoption) * (time - adoption) + 0.1 * time + shift;
}

// Outcomes lambda_i + gamma_t + beta(a, t) D + sd * eps. Weights are of
// product form a_i b_t when `weighted`.
inline std::vector<Observation> draw_rows(const RandomDesign& d, std::mt19937_64& rng, double noise_sd,
                                          bool weighted = false, bool lambda = true) {
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_real_distribution<double> wdist(0.5, 2.0);
  const int units = d.never + static_cast<int>(d.adoption.size());
  std::vector<double> gamma(static_cast<std::size_t>(d.n_times)), bt(static_cast<std::size_t>(d.n_times), 1.0);
  for (auto& g : gamma) g = z(rng);
  if (weighted) {
    for (auto& b : bt) b = wdist(rng);
  }
  std::vector<Observation> rows;
  for (int u = 0; u < units; ++u) {
    const double lam = lambda ? z(rng) : 0.0;
    const double au = weighted ? wdist(rng) : 1.0;
    std::optional<int> a;
    if (u >= d.never) a = d.adoption[static_cast<std::size_t>(u - d.never)];
    for (int t = 1; t <= d.n_times; ++t) {
      double y = lam + gamma[static_cast<std::size_t>(t - 1)] + noise_sd * z(rng);
      if (a && t >= *a) y += cell_effect(*a, t);
      rows.push_back({unit_name(u), t, y, a, "", au * bt[static_cast<std::size_t>(t - 1)]});
    }
  }
  return rows;
}

// Unit dummies (all) plus time dummies (first time dropped) for every row.
inline Eigen::MatrixXd unit_time_dummies(const Panel& p) {
  const auto U = static_cast<Eigen::Index>(p.n_units());
  const auto T = static_cast<Eigen::Index>(p.n_times());
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p.size()), U + T - 1);
  for (std::size_t i = 0; i < p.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    X(k, p.unit_index(i)) = 1.0;
    if (p.time_index(i) > 0) X(k, U + p.time_index(i) - 1) = 1.0;
  }
  return X;
}

// Weighted least squares through the normal equations (X'WX) b = X'Wy.
inline Eigen::VectorXd normal_equations(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const Eigen::VectorXd& w) {
  const Eigen::MatrixXd xtwx = X.transpose() * w.asDiagonal() * X;
  return xtwx.ldlt().solve(X.transpose() * w.asDiagonal() * y);
}

inline Eigen::VectorXd outcomes(const Panel& p) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) y(static_cast<Eigen::Index>(i)) = p.outcome(i);
  return y;
}

inline Eigen::VectorXd weights(const Panel& p) {
  Eigen::VectorXd w(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) w(static_cast<Eigen::Index>(i)) = p.weight(i);
  return w;
}

}  // namespace stagger::test
