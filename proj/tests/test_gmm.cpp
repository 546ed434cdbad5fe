#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "stagger/error.hpp"
#include "stagger/estimators.hpp"
#include "stagger/gmm.hpp"
#include "stagger/simulation.hpp"
#include "support.hpp"

using namespace stagger;

namespace {

Panel heterogeneous(std::uint64_t seed, bool weighted = false) {
  std::mt19937_64 rng(seed);
  const auto d = test::random_design(rng);
  return validate_panel(test::draw_rows(d, rng, 1.0, weighted, true));
}

GmmResult solve_and_sandwich(const MomentSystem& s, SandwichMode mode = SandwichMode::partitioned) {
  return sandwich_vcov(s, solve_gmm(s).theta, mode);
}

}  // namespace

TEST_CASE("joint solve matches the sequential two-stage fit") {
  for (std::uint64_t seed = 1; seed <= 15; ++seed) {
    const auto p = heterogeneous(seed, seed % 2 == 0);
    TwoStageSpec spec;
    const auto s = build_moment_system(p, spec);
    const auto g = solve_gmm(s);
    CHECK(std::abs(g.beta()(0) - two_stage_did(p).value()) < 1e-8);
    CHECK(s.mean_moments(g.theta).cwiseAbs().maxCoeff() < 1e-10);
  }
  const auto p = simulate_panel(preset("sim1"), 3);
  TwoStageSpec spec;
  spec.event_study = EventStudySpec{1, 4, false};
  const auto g = solve_gmm(build_moment_system(p, spec));
  const auto e = two_stage_event_study(p, *spec.event_study);
  CHECK((g.beta() - e.point).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("partitioned and full sandwiches agree") {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const auto p = heterogeneous(seed, seed % 2 == 1);
    for (auto fs : {FirstStage::untreated, FirstStage::saturated}) {
      TwoStageSpec spec;
      spec.first_stage = fs;
      const auto s = build_moment_system(p, spec);
      const auto a = solve_and_sandwich(s).beta_vcov();
      const auto b = solve_and_sandwich(s, SandwichMode::full).beta_vcov();
      CHECK(std::abs(a.matrix(0, 0) - b.matrix(0, 0)) < 1e-10 * std::max(1.0, b.matrix(0, 0)));
    }
  }
}

TEST_CASE("sandwich matches the explicit influence-function formula") {
  // Unweighted, unit clusters: V = (D'D)^-1 [sum_c h_c h_c'] (D'D)^-1 C/(C-1)
  // with h_c = D_c'e2_c - D'X (X0'X0)^-1 X0_c'e1_c.
  for (std::uint64_t seed = 40; seed < 46; ++seed) {
    const auto p = heterogeneous(seed);
    const Eigen::MatrixXd X = test::unit_time_dummies(p);
    const Eigen::VectorXd y = test::outcomes(p);
    const auto n = X.rows();
    Eigen::VectorXd s0 = Eigen::VectorXd::Zero(n), d = Eigen::VectorXd::Zero(n);
    for (std::size_t i = 0; i < p.size(); ++i) {
      (p.treated(i) ? d : s0)(static_cast<Eigen::Index>(i)) = 1.0;
    }
    const Eigen::MatrixXd X0 = s0.asDiagonal() * X;
    const Eigen::VectorXd fe = test::normal_equations(X, y, s0);
    const Eigen::VectorXd e1 = s0.cwiseProduct(y - X * fe);
    const Eigen::VectorXd adj = y - X * fe;
    const double beta = d.dot(adj) / d.sum();
    const Eigen::VectorXd e2 = d.cwiseProduct(adj - d * beta);
    const Eigen::MatrixXd bread = (X0.transpose() * X0).ldlt().solve(Eigen::MatrixXd::Identity(X.cols(), X.cols()));
    const Eigen::RowVectorXd gamma = d.transpose() * X * bread;
    const auto C = static_cast<Eigen::Index>(p.n_units());
    Eigen::VectorXd h = Eigen::VectorXd::Zero(C);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      h(p.unit_index(i)) += d(k) * e2(k) - gamma.dot(X0.row(k)) * e1(k);
    }
    const double var = h.squaredNorm() / (d.sum() * d.sum()) * static_cast<double>(C) / static_cast<double>(C - 1);
    const auto est = two_stage_did(p);
    CHECK(std::abs(est.value() - beta) < 1e-9);
    CHECK(std::abs(est.se() - std::sqrt(var)) < 1e-9);
  }
}

TEST_CASE("singleton clusters without fixed effects give the robust SE") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> z;
  const Eigen::Index n = 40;
  MomentSystem s;
  s.second_design.resize(n, 2);
  s.outcome.resize(n);
  s.weights = Eigen::VectorXd::Ones(n);
  s.first_design.resize(n, 0);
  s.first_mask = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    s.second_design(i, 0) = 1.0;
    s.second_design(i, 1) = z(rng);
    s.outcome(i) = 1.0 + 2.0 * s.second_design(i, 1) + z(rng) * (1.0 + std::abs(s.second_design(i, 1)));
    s.clusters.push_back(static_cast<int>(i));
  }
  s.labels = {"a", "b"};
  const auto g = solve_and_sandwich(s);
  const Eigen::MatrixXd& X = s.second_design;
  const Eigen::VectorXd b = test::normal_equations(X, s.outcome, s.weights);
  const Eigen::VectorXd e = s.outcome - X * b;
  const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
  const Eigen::MatrixXd meat = X.transpose() * e.cwiseAbs2().asDiagonal() * X;
  const Eigen::MatrixXd V = bread * meat * bread * (static_cast<double>(n) / static_cast<double>(n - 1));
  CHECK((g.theta - b).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((g.vcov.matrix - V).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("moment system dimensions and identification") {
  const auto p = simulate_panel(preset("sim1"), 0);
  const auto s = build_moment_system(p, TwoStageSpec{});
  CHECK(s.n_params() == 50 + 9 + 1);
  CHECK(s.n_moments() == s.n_params());
  CHECK(s.jacobian().rows() == 60);

  auto design = make_two_stage_design(p, TwoStageSpec{});
  Eigen::MatrixXd first(design.first.rows(), design.first.cols() + 1);
  first << design.first, design.first.col(3);
  design.first = first;
  design.first_labels.push_back("copy");
  try {
    build_moment_system(design);
    FAIL("expected Unidentified");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Unidentified);
    const std::string msg = e.what();
    CHECK((msg.find("copy") != std::string::npos || msg.find(design.first_labels[3]) != std::string::npos));
  }
}

TEST_CASE("cluster relabelling leaves the covariance unchanged") {
  auto rows = simulate_observations(preset("sim2"), 1);
  for (auto& r : rows) r.cluster = "c" + r.unit;
  const auto a = two_stage_did(validate_panel(rows));
  std::mt19937_64 rng(4);
  std::vector<std::string> names;
  for (const auto& r : rows) names.push_back(r.unit);
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  std::vector<std::string> shuffled = names;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (auto& r : rows) {
    const auto k = std::lower_bound(names.begin(), names.end(), r.unit) - names.begin();
    r.cluster = "z" + shuffled[static_cast<std::size_t>(k)];
  }
  const auto b = two_stage_did(validate_panel(rows));
  CHECK(a.value() == b.value());
  CHECK(std::abs(a.se() - b.se()) < 1e-12);
}

TEST_CASE("coarser clusters change the GMM SE") {
  auto rows = simulate_observations(preset("sim1"), 2);
  const auto a = two_stage_did(validate_panel(rows));
  for (auto& r : rows) r.cluster = std::to_string(std::stoi(r.unit.substr(1)) / 2);
  const auto b = two_stage_did(validate_panel(rows));
  CHECK(a.value() == b.value());
  CHECK(a.n_clusters == 50);
  std::set<std::string> pairs;
  for (const auto& r : rows) pairs.insert(r.cluster);
  CHECK(b.n_clusters == pairs.size());
  CHECK(pairs.size() <= 26);
  CHECK(std::abs(a.se() - b.se()) > 1e-6);
}

TEST_CASE("sandwich requires two clusters") {
  auto rows = simulate_observations(preset("sim1"), 0);
  for (auto& r : rows) r.cluster = "one";
  const auto p = validate_panel(rows);
  CHECK_THROWS_AS(two_stage_did(p), Error);
}
