#pragma once

// Implicit weights of the two-way fixed-effects DiD regression on each treated
// cohort x time cell, and the weights stacked DiD puts on cohort durations.

#include <iosfwd>
#include <string>
#include <vector>

#include "stagger/estimate.hpp"
#include "stagger/panel.hpp"

namespace stagger {

struct CellWeight {
  int cohort = 0;  // cohort index
  int adoption = 0;
  int time = 0;
  int rel_time = 0;
  double weight = 0.0;
  double p_d_given_g = 0.0;
  double p_d_given_p = 0.0;
  double p_d = 0.0;
  double p_gp = 0.0;
};

struct WeightDecomposition {
  std::vector<CellWeight> cells;  // treated cells with positive weight, by (cohort, time)
  bool closed_form = true;        // false when computed by the auxiliary regressions

  double sum() const;
  std::size_t negative_count() const;
  double negative_mass() const;
  const CellWeight* find(int adoption, int time) const;
};

// w_gp proportional to [1 - P(D|g) - (P(D|p) - P(D))] P(g,p), normalised over
// treated cells. Unbalanced panels fall back to did_weights_bruteforce.
WeightDecomposition did_weights(const Panel& panel);

// For each treated cell, the slope from regressing the cell indicator on the
// regression residual of D on level and time effects.
WeightDecomposition did_weights_bruteforce(const Panel& panel, FeLevel fe = FeLevel::unit);

// sum_gp w_gp beta_gp; throws MissingCell if the grid lacks a weighted cell.
double implied_estimand(const WeightDecomposition& weights, const EffectGrid& grid);

struct StackedWeights {
  int pre = 0;
  int post = 0;
  double tau = 0.0;            // treated-period share of each window
  std::vector<double> pi;      // treated-unit share per dataset
  std::vector<double> rho;     // dataset size share
  std::vector<double> weight;  // per dataset, for each duration 1..post

  double sum() const;  // over datasets and durations
};

// Closed form for datasets of `cohort_sizes[c]` treated units and a common
// control pool. Throws DegenerateDataset when a dataset lacks treated or
// control units.
StackedWeights stacked_weights(const std::vector<double>& cohort_sizes, double control_size, int pre, int post);

// group,period,weight,p_d_given_g,p_d_given_p,p_d,p_gp
void write_weights_csv(std::ostream& os, const WeightDecomposition& weights);
std::string weights_json(const WeightDecomposition& weights);

}  // namespace stagger
