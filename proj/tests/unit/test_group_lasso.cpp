#include <gtest/gtest.h>

#include <algorithm>
#include <numbers>
#include <random>

#include "atomident/group_lasso.hpp"
#include "oracles.hpp"

using namespace atomident;

namespace {

GroupLassoProblem random_problem(std::mt19937_64& gen, int n, int p, double lambda_frac) {
  const Vector u = oracle::randn(gen, n);
  GroupLassoProblem prob;
  const auto poles = oracle::random_poles(gen, p);
  prob.y = 0.3 * oracle::randn(gen, n);
  for (int i = 0; i < p; ++i) {
    prob.features.push_back(build_feature(poles[i], u).zeta);
    if (i < 2) prob.y += prob.features.back() * GroupCoefficients(oracle::randn(gen, 2));
  }
  double lmax = 0.0;
  for (const auto& z : prob.features) lmax = std::max(lmax, (z.transpose() * prob.y).norm());
  prob.lambda = lambda_frac * lmax;
  return prob;
}

Vector stack(const std::vector<GroupCoefficients>& g) {
  Vector x(2 * static_cast<Eigen::Index>(g.size()));
  for (std::size_t i = 0; i < g.size(); ++i) x.segment<2>(2 * static_cast<Eigen::Index>(i)) = g[i];
  return x;
}

}  // namespace

TEST(Problem, Validation) {
  GroupLassoProblem p;
  p.y = Vector::Ones(5);
  p.features.push_back(FeatureMatrix::Ones(4, 2));
  EXPECT_THROW(p.validate(), InvalidInput);
  p.features[0] = FeatureMatrix::Ones(5, 2);
  p.lambda = 0.0;
  EXPECT_THROW(p.validate(), InvalidInput);
  p.lambda = 1.0;
  p.weights = Vector::Constant(1, -1.0);
  EXPECT_THROW(p.validate(), InvalidInput);
  p.weights = Vector::Ones(1);
  EXPECT_NO_THROW(p.validate());
}

TEST(Solve, LargeLambdaGivesZero) {
  std::mt19937_64 gen(1);
  GroupLassoProblem p = random_problem(gen, 30, 1, 1.0);
  const auto s = solve(p);
  EXPECT_TRUE(s.converged);
  EXPECT_EQ(s.gammas[0].norm(), 0.0);
  EXPECT_EQ(kkt_violation(p, s.gammas).max_violation, 0.0);
}

TEST(Solve, OrthonormalSoftThreshold) {
  GroupLassoProblem p;
  FeatureMatrix z = FeatureMatrix::Zero(4, 2);
  z(0, 0) = 1.0;
  z(1, 1) = 1.0;
  p.features.push_back(z);
  p.y = Vector(4);
  p.y << 3.0, 4.0, 1.0, -1.0;
  p.lambda = 2.0;
  const auto s = solve(p);
  const Eigen::Vector2d b(3.0, 4.0);
  const Eigen::Vector2d expect = b * (b.norm() - 2.0) / b.norm();
  EXPECT_LE((s.gammas[0] - expect).norm(), 1e-12);
}

TEST(Solve, MatchesProximalOracle) {
  std::mt19937_64 gen(2);
  for (int rep = 0; rep < 10; ++rep) {
    GroupLassoProblem p = random_problem(gen, 30, 5, 0.05 + 0.1 * rep / 10.0);
    const auto s = solve(p);
    ASSERT_TRUE(s.converged);
    EXPECT_LE(s.kkt_violation, 1e-8);
    const double ref = oracle::objective(p, oracle::proximal_gradient(p));
    EXPECT_LE(std::abs(s.objective - ref) / ref, 1e-6) << rep;
    EXPECT_LE(s.objective, ref * (1 + 1e-12));
  }
}

TEST(Solve, SolutionInvariants) {
  std::mt19937_64 gen(3);
  GroupLassoProblem p = random_problem(gen, 40, 8, 0.1);
  const auto s = solve(p);
  EXPECT_LE((residual_of(p, s.gammas) - s.residual).norm(), 1e-10);
  EXPECT_NEAR(objective_value(p, s.gammas), s.objective, 1e-10);
  EXPECT_NEAR(oracle::objective(p, stack(s.gammas)), s.objective, 1e-10);
}

TEST(Solve, WeightedMatchesOracle) {
  std::mt19937_64 gen(4);
  GroupLassoProblem p = random_problem(gen, 30, 6, 0.1);
  p.weights = Vector(6);
  p.weights << 0.2, 1.0, 3.0, 0.5, 10.0, 1.5;
  const auto s = solve(p);
  ASSERT_TRUE(s.converged);
  const double ref = oracle::objective(p, oracle::proximal_gradient(p));
  EXPECT_LE(std::abs(s.objective - ref) / ref, 1e-6);
}

TEST(Solve, MonotoneSweeps) {
  std::mt19937_64 gen(5);
  GroupLassoProblem p = random_problem(gen, 50, 12, 0.03);
  SolverOptions o;
  o.record_objective = true;
  const auto s = solve(p, o);
  ASSERT_GE(s.objective_history.size(), 2u);
  for (std::size_t i = 1; i < s.objective_history.size(); ++i) {
    EXPECT_LE(s.objective_history[i], s.objective_history[i - 1] * (1 + 1e-14) + 1e-14) << i;
  }
}

TEST(Solve, ReorderingInvariant) {
  std::mt19937_64 gen(6);
  GroupLassoProblem p = random_problem(gen, 30, 6, 0.08);
  GroupLassoProblem q = p;
  std::reverse(q.features.begin(), q.features.end());
  const auto a = solve(p), b = solve(q);
  EXPECT_NEAR(a.objective, b.objective, 1e-9 * a.objective);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_LE((a.gammas[i] - b.gammas[5 - i]).norm(), 1e-5);
  }
}

TEST(Solve, RealPoleGroup) {
  // Zero second column: reduces to a scalar lasso with threshold lambda.
  std::mt19937_64 gen(7);
  const Vector u = oracle::randn(gen, 30);
  GroupLassoProblem p;
  p.features.push_back(build_feature(Pole(0.7, 0.0), u).zeta);
  p.y = oracle::randn(gen, 30) + 0.8 * p.features[0].col(0);
  p.lambda = 0.5;
  const auto s = solve(p);
  const Vector z = p.features[0].col(0);
  const double c = z.dot(p.y);
  const double expect = std::copysign(std::max(std::abs(c) - p.lambda, 0.0), c) / z.squaredNorm();
  EXPECT_NEAR(s.gammas[0](0), expect, 1e-10);
  EXPECT_EQ(s.gammas[0](1), 0.0);
}

TEST(Solve, AddingInactiveFeatureKeepsObjective) {
  std::mt19937_64 gen(8);
  GroupLassoProblem p = random_problem(gen, 30, 5, 0.1);
  const auto s = solve(p);
  // A feature built to have a small score on the optimal residual.
  FeatureMatrix extra = FeatureMatrix::Zero(30, 2);
  extra.col(0) = oracle::randn(gen, 30);
  extra.col(1) = oracle::randn(gen, 30);
  const double sc = violation_score(extra, s.residual);
  extra *= 0.5 * p.lambda / sc;
  ASSERT_LE(violation_score(extra, s.residual), p.lambda);
  GroupLassoProblem q = p;
  q.features.push_back(extra);
  const auto t = solve(q, {}, s.gammas);
  EXPECT_NEAR(t.objective, s.objective, 1e-8 * s.objective);
  EXPECT_LE(t.gammas.back().norm(), 1e-8);
}

TEST(Solve, WarmStartPadded) {
  std::mt19937_64 gen(9);
  GroupLassoProblem p = random_problem(gen, 30, 6, 0.05);
  GroupLassoProblem small = p;
  small.features.pop_back();
  const auto s0 = solve(small);
  const auto cold = solve(p);
  const auto warm = solve(p, {}, s0.gammas);
  EXPECT_NEAR(cold.objective, warm.objective, 1e-9 * cold.objective);
}

TEST(Solve, NonConvergenceReported) {
  std::mt19937_64 gen(10);
  GroupLassoProblem p = random_problem(gen, 30, 8, 0.01);
  SolverOptions o;
  o.max_iter = 1;
  o.tol = 1e-14;
  const auto s = solve(p, o);
  EXPECT_FALSE(s.converged);
  EXPECT_GT(s.kkt_violation, 0.0);
  EXPECT_EQ(s.gammas.size(), 8u);
}

TEST(Kkt, ZeroAtLargeLambda) {
  std::mt19937_64 gen(11);
  GroupLassoProblem p = random_problem(gen, 30, 4, 1.0);
  std::vector<GroupCoefficients> zero(4, GroupCoefficients::Zero());
  EXPECT_EQ(kkt_violation(p, zero).max_violation, 0.0);
}

TEST(Kkt, PerturbationIncreasesViolation) {
  std::mt19937_64 gen(12);
  GroupLassoProblem p = random_problem(gen, 30, 5, 0.05);
  const auto s = solve(p);
  auto g = s.gammas;
  const auto it = std::find_if(g.begin(), g.end(), [](const auto& x) { return x.norm() > 1e-3; });
  ASSERT_NE(it, g.end());
  (*it)(0) += 1e-3;
  EXPECT_GT(kkt_violation(p, g).max_violation, s.kkt_violation);
}

TEST(Kkt, PerGroupFormula) {
  std::mt19937_64 gen(13);
  GroupLassoProblem p = random_problem(gen, 20, 3, 0.2);
  std::vector<GroupCoefficients> g{GroupCoefficients(0.3, -0.1), GroupCoefficients::Zero(),
                                   GroupCoefficients(0.0, 0.2)};
  const Vector r = p.y - p.features[0] * g[0] - p.features[2] * g[2];
  const auto rep = kkt_violation(p, g);
  const Eigen::Vector2d c0 = p.features[0].transpose() * r;
  EXPECT_NEAR(rep.per_group(0), (c0 - p.lambda * g[0] / g[0].norm()).norm(), 1e-12);
  EXPECT_NEAR(rep.per_group(1),
              std::max(0.0, (p.features[1].transpose() * r).norm() - p.lambda), 1e-12);
  EXPECT_EQ(rep.max_violation, rep.per_group.maxCoeff());
}

TEST(ViolationScore, Cases) {
  std::mt19937_64 gen(14);
  const Vector u = oracle::randn(gen, 25);
  const auto f = build_feature(Pole(0.8, 1.2), u);
  EXPECT_EQ(violation_score(f, Vector::Zero(25)), 0.0);
  const Vector r = f.zeta.col(0);
  const Eigen::Vector2d direct = f.zeta.transpose() * f.zeta * Eigen::Vector2d(1, 0);
  EXPECT_NEAR(violation_score(f, r), direct.norm(), 1e-12);
  // Residual orthogonal to both columns.
  Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(f.zeta).householderQ();
  const Vector orth = q.col(2);
  EXPECT_LE(violation_score(f, orth), 1e-12);
}

TEST(SolveBlock, MatchesBruteForce) {
  std::mt19937_64 gen(15);
  for (int rep = 0; rep < 50; ++rep) {
    Eigen::Matrix<double, 6, 2> z;
    for (int i = 0; i < 12; ++i) z.data()[i] = oracle::randn(gen, 1)(0);
    if (rep % 5 == 0) z.col(1).setZero();
    const Eigen::Matrix2d gram = z.transpose() * z;
    // b = z^T r keeps b in the range of the Gram.
    const Eigen::Vector2d b = z.transpose() * (oracle::randn(gen, 6) * 3.0);
    const double pen = 0.5 + rep * 0.02;
    const GroupCoefficients g = solve_block(gram, b, pen);
    auto f = [&](const Eigen::Vector2d& x) {
      return x.dot(gram * x) - 2.0 * b.dot(x) + 2.0 * pen * x.norm();
    };
    // Local probe in every direction around the returned point.
    for (int k = 0; k < 64; ++k) {
      const double th = 2.0 * std::numbers::pi * k / 64;
      const Eigen::Vector2d d(std::cos(th), std::sin(th));
      EXPECT_GE(f(g + 1e-5 * d), f(g) - 1e-12) << rep;
    }
  }
}
