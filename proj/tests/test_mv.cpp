#include <gtest/gtest.h>

#include <random>

#include "cardport/mv.hpp"
#include "cardport/portfolio.hpp"
#include "support.hpp"

using namespace cardport;

namespace {

MarketModel model(const Eigen::MatrixXd& sigma, const Eigen::VectorXd& mu) {
  return MarketModel::from_moments(mu, SymMatrix(sigma));
}

// Long-only minimum variance at return rho via the enumeration oracle.
double oracle_phi(const MarketModel& m, double rho) {
  const auto n = static_cast<int>(m.assets());
  Eigen::MatrixXd a(2, n);
  a.row(0).setOnes();
  a.row(1) = m.mu.transpose();
  const auto r = testsupport::qp_by_enumeration(m.sigma.dense(), Eigen::VectorXd::Zero(n), a,
                                                Eigen::Vector2d(1.0, rho), Eigen::VectorXd::Zero(n),
                                                Eigen::VectorXd::Ones(n));
  return r.feasible ? r.value : testsupport::kInf;
}

}  // namespace

TEST(SolveMv, SymmetricMidpoint) {
  const MarketModel m = model(0.04 * Eigen::MatrixXd::Identity(2, 2), Eigen::Vector2d(0.01, 0.03));
  const PortfolioSolution s = solve_mv(m, 0.02);
  ASSERT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.weights(0), 0.5, 1e-10);
  EXPECT_NEAR(s.achieved_return, 0.02, 1e-12);
}

TEST(SolveMv, MaxReturnIsSingleAsset) {
  std::mt19937_64 rng(1);
  const MarketModel m = model(testsupport::random_pd(rng, 4, 0.1), Eigen::Vector4d(0.01, 0.05, 0.02, 0.03));
  const PortfolioSolution s = solve_mv(m, 0.05);
  ASSERT_EQ(s.status, SolveStatus::Optimal);
  EXPECT_NEAR(s.weights(1), 1.0, 1e-9);
  EXPECT_NEAR(s.objective, m.sigma(1, 1), 1e-10);
}

TEST(SolveMv, OutsideRangeIsInfeasible) {
  const MarketModel m = model(Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d(0.01, 0.02, 0.03));
  EXPECT_EQ(solve_mv(m, 0.031).status, SolveStatus::Infeasible);
  EXPECT_EQ(solve_mv(m, 0.015).status, SolveStatus::Infeasible);  // below the GMV return
}

TEST(SolveMv, MatchesEnumerationOracle) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 10; ++trial) {
    const MarketModel m = testsupport::random_moments(rng, 6);
    const ReturnRange r = return_range(m);
    const double rho = r.rho_min + (0.2 + 0.06 * trial) * (r.rho_max - r.rho_min);
    const PortfolioSolution s = solve_mv(m, rho, r);
    ASSERT_EQ(s.status, SolveStatus::Optimal);
    EXPECT_NEAR(s.objective, oracle_phi(m, rho), 1e-10);
    EXPECT_NEAR(s.weights.sum(), 1.0, 1e-8);
    EXPECT_NEAR(s.achieved_return, m.mu.dot(s.weights), 1e-10);
  }
}

TEST(ReturnRange, Examples) {
  const MarketModel m = model(Eigen::MatrixXd::Identity(3, 3), Eigen::Vector3d(0.01, 0.02, 0.03));
  const ReturnRange r = return_range(m);
  EXPECT_NEAR(r.rho_min, 0.02, 1e-12);
  EXPECT_DOUBLE_EQ(r.rho_max, 0.03);
  EXPECT_NEAR(r.gmv(0), 1.0 / 3.0, 1e-12);

  const MarketModel one = model(Eigen::MatrixXd::Constant(1, 1, 0.02), Eigen::VectorXd::Constant(1, 0.005));
  const ReturnRange r1 = return_range(one);
  EXPECT_DOUBLE_EQ(r1.rho_min, 0.005);
  EXPECT_DOUBLE_EQ(r1.rho_max, 0.005);
}

TEST(ReturnRange, GmvMatchesOracle) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    const MarketModel m = testsupport::random_moments(rng, 8);
    const ReturnRange r = return_range(m);
    const auto ref = testsupport::qp_by_enumeration(m.sigma.dense(), Eigen::VectorXd::Zero(8),
                                                    Eigen::MatrixXd::Ones(1, 8), Eigen::VectorXd::Ones(1),
                                                    Eigen::VectorXd::Zero(8), Eigen::VectorXd::Ones(8));
    ASSERT_TRUE(ref.feasible);
    EXPECT_NEAR(r.rho_min, m.mu.dot(ref.x), 1e-8);
  }
}

TEST(MvFrontier, EndpointsAndShape) {
  std::mt19937_64 rng(47);
  const MarketModel m = testsupport::random_moments(rng, 6);
  const FrontierCurve two = mv_frontier(m, 2);
  ASSERT_EQ(two.points.size(), 2u);
  const ReturnRange r = return_range(m);
  EXPECT_DOUBLE_EQ(two.points[0].rho, r.rho_min);
  EXPECT_DOUBLE_EQ(two.points[1].rho, r.rho_max);
  EXPECT_THROW(mv_frontier(m, 1), std::invalid_argument);

  const FrontierCurve c = mv_frontier(m, 40);
  for (std::size_t j = 0; j + 1 < c.points.size(); ++j) {
    ASSERT_TRUE(c.points[j].feasible());
    EXPECT_LE(c.points[j].value, c.points[j + 1].value + 1e-10);
    if (j + 2 < c.points.size()) {
      EXPECT_LE(c.points[j + 1].value, 0.5 * (c.points[j].value + c.points[j + 2].value) + 1e-8);
    }
  }
}

// Identity covariance, three assets: while the solution stays interior it is
// the projection onto {e'x = 1, mu'x = rho}: x = 1/3 + (rho - mean) (mu - mean)/|mu - mean|^2.
TEST(MvFrontier, ClosedFormInteriorProjection) {
  const Eigen::Vector3d mu(0.01, 0.02, 0.04);
  const MarketModel m = model(Eigen::MatrixXd::Identity(3, 3), mu);
  const FrontierCurve c = mv_frontier(m, 5);
  const double mean = mu.mean();
  const Eigen::Vector3d d = mu.array() - mean;
  for (const auto& p : c.points) {
    const Eigen::Vector3d x = Eigen::Vector3d::Constant(1.0 / 3.0) + (p.rho - mean) / d.squaredNorm() * d;
    if (x.minCoeff() <= 0.0) continue;
    EXPECT_NEAR(p.value, x.squaredNorm(), 1e-12);
  }
}

TEST(SolveMv, InequalityVariantAgreesAboveRhoMin) {
  std::mt19937_64 rng(53);
  for (int trial = 0; trial < 5; ++trial) {
    const MarketModel m = testsupport::random_moments(rng, 7);
    const ReturnRange r = return_range(m);
    for (int j = 0; j < 10; ++j) {
      const double rho = r.rho_min + (r.rho_max - r.rho_min) * j / 9.0;
      const auto eq = solve_mv(m, rho, r);
      const auto ge = solve_mv(m, rho, r, ReturnConstraint::AtLeast);
      ASSERT_EQ(eq.status, SolveStatus::Optimal);
      ASSERT_EQ(ge.status, SolveStatus::Optimal);
      EXPECT_NEAR(eq.objective, ge.objective, 1e-8);
    }
  }
}
