#pragma once

// Joint just-identified GMM for the two-stage estimators. With first-stage
// parameters a (FE first, then any extra first-stage columns) and second-stage
// effects b, each row contributes
//
//   f1_i = w_i s_i z_i (y_i - z_i'a)
//   f2_i = w_i d_i (y_i - fe_i'a_fe - d_i'b)
//
// where s_i selects first-stage rows and d_i are the second-stage indicators.
// The moments are linear in (a, b), so the estimator is one linear solve and
// the Jacobian depends on the data only.

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "stagger/regression.hpp"
#include "stagger/two_stage_design.hpp"

namespace stagger {

struct MomentSystem {
  std::vector<std::string> labels;
  Eigen::Index n_first = 0;
  Eigen::Index n_fe = 0;
  Eigen::MatrixXd first_design;
  Eigen::VectorXd first_mask;
  Eigen::MatrixXd second_design;
  Eigen::VectorXd outcome;
  Eigen::VectorXd weights;
  std::vector<int> clusters;

  Eigen::Index n_params() const { return n_first + second_design.cols(); }
  Eigen::Index n_moments() const { return n_first + second_design.cols(); }
  Eigen::Index n_rows() const { return outcome.size(); }

  Eigen::VectorXd moment(Eigen::Index row, const Eigen::VectorXd& theta) const;
  // Row moments stacked as an n x m matrix.
  Eigen::MatrixXd moment_matrix(const Eigen::VectorXd& theta) const;
  // Sample mean of the moments, summed in fixed 256-row chunks combined
  // pairwise so the result does not depend on scheduling.
  Eigen::VectorXd mean_moments(const Eigen::VectorXd& theta) const;
  // Mean of d f_i / d theta (constant).
  Eigen::MatrixXd jacobian() const;
};

// The variant (difference-in-differences or event study) follows from
// spec.event_study. Throws Unidentified naming the offending parameter when the mean Jacobian
// is singular.
MomentSystem build_moment_system(const Panel& panel, const TwoStageSpec& spec);
MomentSystem build_moment_system(const TwoStageDesign& design);

struct GmmResult {
  Eigen::VectorXd theta;
  std::vector<std::string> labels;
  Eigen::Index beta_offset = 0;
  Vcov vcov;  // empty after solve_gmm; filled by sandwich_vcov
  bool full_vcov = false;

  Eigen::VectorXd beta() const { return theta.tail(theta.size() - beta_offset); }
  // Covariance of the second-stage effects.
  Vcov beta_vcov() const;
};

GmmResult solve_gmm(const MomentSystem& system);

enum class SandwichMode {
  partitioned,  // eliminate the first-stage block; returns the effects' covariance only
  full,         // invert the whole Jacobian; returns the covariance of every parameter
};

// G^{-1} Omega G^{-1}' / N with Omega = (1/N) sum_c f_c f_c' * C/(C-1).
GmmResult sandwich_vcov(const MomentSystem& system, const Eigen::VectorXd& theta,
                        SandwichMode mode = SandwichMode::partitioned);

}  // namespace stagger
