#pragma once

// Weighted least squares with dummy-expanded fixed effects, solved by a
// column-pivoted Householder QR, plus cluster-robust covariance and the
// two-way within transform of the treatment indicator.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "stagger/panel.hpp"

namespace stagger {

// A categorical regressor. Codes index level_labels. When `block` is set
// (one entry per level) a reference level is dropped inside every block
// rather than once for the whole factor; this is what nested effects such
// as dataset x time need.
struct Factor {
  std::string name;
  std::vector<int> codes;
  std::vector<std::string> level_labels;
  std::vector<int> block;
};

struct Regressor {
  std::string name;
  Eigen::VectorXd values;
};

// Reference rule: the first factor keeps all its levels unless an intercept
// is requested; every other factor drops its first level present in the rows.
struct DesignSpec {
  std::vector<Factor> factors;
  std::vector<Regressor> regressors;
  bool intercept = false;
};

struct Design {
  Eigen::MatrixXd X;
  std::vector<std::string> labels;
};

Design build_design(const DesignSpec& spec);

struct FitResult {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd residuals;  // y - fitted, unweighted
  Eigen::VectorXd fitted;
  Eigen::MatrixXd xtx_inverse;  // (X'WX)^{-1}
  std::vector<std::string> labels;
  std::size_t n_obs = 0;  // rows with positive weight
  std::ptrdiff_t dof = 0;
  Eigen::MatrixXd design;
  Eigen::VectorXd weights;

  Eigen::Index index_of(const std::string& label) const;
  double coefficient(const std::string& label) const { return coefficients(index_of(label)); }
};

// Singular values of the weighted design below 1e-10 x the largest are
// treated as zero; the error names the columns the pivoting pushed out.
FitResult wls_fit(const Design& design, const Eigen::VectorXd& y, const Eigen::VectorXd& weights);
FitResult wls_fit(const DesignSpec& spec, const Eigen::VectorXd& y, const Eigen::VectorXd& weights);

struct Vcov {
  Eigen::MatrixXd matrix;
  std::vector<std::string> labels;
  std::size_t n_clusters = 0;
  double adjustment = 1.0;

  double se(Eigen::Index i) const { return std::sqrt(std::max(0.0, matrix(i, i))); }
  Vcov subset(std::span<const Eigen::Index> indices) const;
};

// (X'WX)^{-1} [sum_c s_c s_c'] (X'WX)^{-1} * G/(G-1) * (N-1)/(N-k), with
// s_c = sum_{i in c} w_i u_i x_i. Cluster codes may be arbitrary integers.
Vcov cluster_vcov(const FitResult& fit, std::span<const int> clusters);

// Closed-form two-way within transform of D:
//   D - P(D=1|g) - [P(D=1|t) - P(D=1)]
// using weighted frequencies. Exact only when every unit is observed at every
// time with weights of product form w_it = a_i b_t; otherwise throws
// UnbalancedPanel and residualize_treatment should be used instead.
Eigen::VectorXd double_demean(const Panel& panel);

// Residual of D from a weighted regression on level + time effects.
Eigen::VectorXd residualize_treatment(const Panel& panel, FeLevel level = FeLevel::unit);

bool is_balanced(const Panel& panel);

}  // namespace stagger
