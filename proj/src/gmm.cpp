#include "stagger/gmm.hpp"

#include <map>

#include "stagger/error.hpp"

namespace stagger {

namespace {

constexpr Eigen::Index kChunk = 256;
constexpr double kSingularTolerance = 1e-10;

// Pairwise combination of per-chunk partial sums.
Eigen::VectorXd pairwise_combine(std::vector<Eigen::VectorXd> parts) {
  while (parts.size() > 1) {
    std::vector<Eigen::VectorXd> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t j = 0; j + 1 < parts.size(); j += 2) next.push_back(parts[j] + parts[j + 1]);
    if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return parts.front();
}

// Dense cluster codes in order of first appearance among rows with positive weight.
std::vector<Eigen::Index> dense_clusters(const MomentSystem& s, Eigen::Index& n_clusters) {
  std::map<int, Eigen::Index> dense;
  std::vector<Eigen::Index> code(static_cast<std::size_t>(s.n_rows()), -1);
  for (Eigen::Index i = 0; i < s.n_rows(); ++i) {
    if (s.weights(i) <= 0.0) continue;
    auto [it, inserted] = dense.emplace(s.clusters[static_cast<std::size_t>(i)], static_cast<Eigen::Index>(dense.size()));
    code[static_cast<std::size_t>(i)] = it->second;
  }
  n_clusters = static_cast<Eigen::Index>(dense.size());
  return code;
}

Eigen::MatrixXd cluster_sums(const Eigen::MatrixXd& rows, const std::vector<Eigen::Index>& code, Eigen::Index n_clusters) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(n_clusters, rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    const Eigen::Index c = code[static_cast<std::size_t>(i)];
    if (c >= 0) out.row(c) += rows.row(i);
  }
  return out;
}

// Blocks of A = -N * jacobian: [[A11, 0], [A21, A22]].
struct JacobianBlocks {
  Eigen::MatrixXd a11, a21, a22;
};

JacobianBlocks jacobian_blocks(const MomentSystem& s) {
  JacobianBlocks b;
  const Eigen::VectorXd first_w = s.first_mask.cwiseProduct(s.weights);
  b.a11 = s.first_design.transpose() * first_w.asDiagonal() * s.first_design;
  b.a21 = Eigen::MatrixXd::Zero(s.second_design.cols(), s.n_first);
  b.a21.leftCols(s.n_fe) = s.second_design.transpose() * s.weights.asDiagonal() * s.first_design.leftCols(s.n_fe);
  b.a22 = s.second_design.transpose() * s.weights.asDiagonal() * s.second_design;
  return b;
}

Eigen::MatrixXd assemble(const JacobianBlocks& b) {
  const Eigen::Index k1 = b.a11.rows();
  const Eigen::Index k2 = b.a22.rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(k1 + k2, k1 + k2);
  a.topLeftCorner(k1, k1) = b.a11;
  a.bottomLeftCorner(k2, k1) = b.a21;
  a.bottomRightCorner(k2, k2) = b.a22;
  return a;
}

}  // namespace

Eigen::VectorXd MomentSystem::moment(Eigen::Index row, const Eigen::VectorXd& theta) const {
  Eigen::VectorXd f(n_moments());
  const double w = weights(row);
  const auto z = first_design.row(row);
  const auto d = second_design.row(row);
  const double e1 = outcome(row) - z.dot(theta.head(n_first));
  f.head(n_first) = (w * first_mask(row) * e1) * z.transpose();
  const double e2 = outcome(row) - z.head(n_fe).dot(theta.head(n_fe)) - d.dot(theta.tail(second_design.cols()));
  f.tail(second_design.cols()) = (w * e2) * d.transpose();
  return f;
}

Eigen::MatrixXd MomentSystem::moment_matrix(const Eigen::VectorXd& theta) const {
  const Eigen::Index k2 = second_design.cols();
  const Eigen::VectorXd e1 = outcome - first_design * theta.head(n_first);
  const Eigen::VectorXd e2 =
      outcome - first_design.leftCols(n_fe) * theta.head(n_fe) - second_design * theta.tail(k2);
  Eigen::MatrixXd F(n_rows(), n_moments());
  F.leftCols(n_first) = (weights.cwiseProduct(first_mask).cwiseProduct(e1)).asDiagonal() * first_design;
  F.rightCols(k2) = (weights.cwiseProduct(e2)).asDiagonal() * second_design;
  return F;
}

Eigen::VectorXd MomentSystem::mean_moments(const Eigen::VectorXd& theta) const {
  const Eigen::Index n = n_rows();
  if (n == 0) return Eigen::VectorXd::Zero(n_moments());
  std::vector<Eigen::VectorXd> parts;
  for (Eigen::Index start = 0; start < n; start += kChunk) {
    const Eigen::Index stop = std::min(n, start + kChunk);
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(n_moments());
    for (Eigen::Index i = start; i < stop; ++i) acc += moment(i, theta);
    parts.push_back(std::move(acc));
  }
  return pairwise_combine(std::move(parts)) / static_cast<double>(n);
}

Eigen::MatrixXd MomentSystem::jacobian() const {
  return -assemble(jacobian_blocks(*this)) / static_cast<double>(n_rows());
}

MomentSystem build_moment_system(const TwoStageDesign& design) {
  MomentSystem s;
  s.labels = design.first_labels;
  s.labels.insert(s.labels.end(), design.second_labels.begin(), design.second_labels.end());
  s.n_first = design.first.cols();
  s.n_fe = design.n_fe;
  s.first_design = design.first;
  s.first_mask = design.first_mask;
  s.second_design = design.second;
  s.outcome = design.outcome;
  s.weights = design.weights;
  s.clusters = design.clusters;

  // The Jacobian is block lower-triangular, so it is invertible iff both
  // diagonal blocks are.
  const auto blocks = jacobian_blocks(s);
  auto check_block = [&](const Eigen::MatrixXd& block, Eigen::Index offset) {
    if (block.rows() == 0) return;
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(block).singularValues();
    Eigen::Index rank = 0;
    for (Eigen::Index j = 0; j < sv.size(); ++j) rank += sv(j) > kSingularTolerance * sv(0) ? 1 : 0;
    if (sv(0) <= 0.0) rank = 0;
    if (rank < block.rows()) {
      Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(block);
      const auto& perm = qr.colsPermutation().indices();
      std::string names;
      for (Eigen::Index j = rank; j < block.rows(); ++j) {
        names += (names.empty() ? "" : ", ") + s.labels[static_cast<std::size_t>(offset + perm(j))];
      }
      throw Error(ErrorKind::Unidentified, "singular moment Jacobian; unidentified parameters: " + names);
    }
  };
  check_block(blocks.a11, 0);
  check_block(blocks.a22, s.n_first);
  return s;
}

MomentSystem build_moment_system(const Panel& panel, const TwoStageSpec& spec) {
  return build_moment_system(make_two_stage_design(panel, spec));
}

Vcov GmmResult::beta_vcov() const {
  if (!full_vcov) return vcov;
  std::vector<Eigen::Index> idx;
  for (Eigen::Index j = beta_offset; j < theta.size(); ++j) idx.push_back(j);
  return vcov.subset(idx);
}

GmmResult solve_gmm(const MomentSystem& system) {
  const Eigen::Index m = system.n_params();
  // mean moments are g(theta) = (b - A theta) / N
  const Eigen::MatrixXd A = assemble(jacobian_blocks(system));
  Eigen::VectorXd b(m);
  const Eigen::VectorXd first_w = system.first_mask.cwiseProduct(system.weights);
  b.head(system.n_first) = system.first_design.transpose() * first_w.cwiseProduct(system.outcome);
  b.tail(system.second_design.cols()) =
      system.second_design.transpose() * system.weights.cwiseProduct(system.outcome);

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  qr.setThreshold(kSingularTolerance);
  if (qr.rank() < m) throw Error(ErrorKind::SingularSystem, "moment system is singular");
  GmmResult out;
  out.theta = qr.solve(b);
  out.labels = system.labels;
  out.beta_offset = system.n_first;
  return out;
}

GmmResult sandwich_vcov(const MomentSystem& system, const Eigen::VectorXd& theta, SandwichMode mode) {
  if (theta.size() != system.n_params()) throw Error(ErrorKind::InvalidInput, "parameter vector has the wrong length");
  Eigen::Index C = 0;
  const auto code = dense_clusters(system, C);
  if (C < 2) throw Error(ErrorKind::TooFewClusters, "sandwich covariance needs at least 2 clusters");
  const double adj = static_cast<double>(C) / static_cast<double>(C - 1);
  const auto blocks = jacobian_blocks(system);
  const Eigen::MatrixXd F = system.moment_matrix(theta);
  const Eigen::Index k1 = system.n_first;
  const Eigen::Index k2 = system.second_design.cols();

  GmmResult out;
  out.theta = theta;
  out.labels = system.labels;
  out.beta_offset = k1;
  out.vcov.n_clusters = static_cast<std::size_t>(C);
  out.vcov.adjustment = adj;

  if (mode == SandwichMode::partitioned) {
    // beta rows of A^{-1}: A22^{-1} [-A21 A11^{-1}, I]. With M = A11^{-1} A21'
    // the influence of row i on beta is A22^{-1} (f2_i - M' f1_i).
    Eigen::MatrixXd H = F.rightCols(k2);
    if (k1 > 0) {
      const Eigen::MatrixXd M = blocks.a11.ldlt().solve(blocks.a21.transpose());
      H -= F.leftCols(k1) * M;
    }
    const Eigen::MatrixXd Hc = cluster_sums(H, code, C);
    const Eigen::MatrixXd a22_inv = blocks.a22.ldlt().solve(Eigen::MatrixXd::Identity(k2, k2));
    Eigen::MatrixXd V = a22_inv * (Hc.transpose() * Hc) * a22_inv.transpose() * adj;
    out.vcov.matrix = 0.5 * (V + V.transpose());
    out.vcov.labels.assign(system.labels.begin() + k1, system.labels.end());
    out.full_vcov = false;
  } else {
    const Eigen::MatrixXd A = assemble(blocks);
    const Eigen::MatrixXd A_inv = A.colPivHouseholderQr().inverse();
    const Eigen::MatrixXd Fc = cluster_sums(F, code, C);
    Eigen::MatrixXd V = A_inv * (Fc.transpose() * Fc) * A_inv.transpose() * adj;
    out.vcov.matrix = 0.5 * (V + V.transpose());
    out.vcov.labels = system.labels;
    out.full_vcov = true;
  }
  return out;
}

}  // namespace stagger
