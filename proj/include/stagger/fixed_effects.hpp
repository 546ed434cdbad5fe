#pragma once

// Row-subset helpers shared by the estimators: fixed-effect factors, outcome
// and weight vectors, and cluster codes for a chosen set of panel rows.

#include <Eigen/Dense>
#include <span>
#include <vector>

#include "stagger/panel.hpp"
#include "stagger/regression.hpp"

namespace stagger {

using RowIndex = Eigen::Index;

std::vector<RowIndex> all_rows(const Panel& panel);

Factor level_factor(const Panel& panel, std::span<const RowIndex> rows, FeLevel level);
Factor time_factor(const Panel& panel, std::span<const RowIndex> rows);

Eigen::VectorXd outcomes_of(const Panel& panel, std::span<const RowIndex> rows);
Eigen::VectorXd weights_of(const Panel& panel, std::span<const RowIndex> rows);
Eigen::VectorXd treatment_of(const Panel& panel, std::span<const RowIndex> rows);
std::vector<int> clusters_of(const Panel& panel, std::span<const RowIndex> rows);

// Distinct clusters among rows with positive weight.
std::size_t count_clusters(const Panel& panel, std::span<const RowIndex> rows);
std::size_t count_positive(const Panel& panel, std::span<const RowIndex> rows);

std::string cohort_name(const Panel& panel, int cohort_index);

}  // namespace stagger
