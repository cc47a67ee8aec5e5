#include <gtest/gtest.h>

#include <random>

#include "cardport/linalg.hpp"
#include "support.hpp"

using namespace cardport;

namespace {

SymMatrix sym(std::initializer_list<std::initializer_list<double>> rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd m(n, n);
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return SymMatrix(m);
}

QpProblem simplex_box(const SymMatrix& q, double lo, double hi) {
  const Eigen::Index n = q.size();
  return {q, Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Ones(1, n), Eigen::VectorXd::Ones(1),
          Eigen::VectorXd::Constant(n, lo), Eigen::VectorXd::Constant(n, hi)};
}

}  // namespace

TEST(SymMatrix, SymmetrizesExactly) {
  Eigen::MatrixXd m(2, 2);
  m << 1.0, 0.3, 0.1, 2.0;
  const SymMatrix s(m);
  EXPECT_EQ(s(0, 1), s(1, 0));
  EXPECT_DOUBLE_EQ(s(0, 1), 0.2);
  EXPECT_THROW(SymMatrix(Eigen::MatrixXd(2, 3)), std::invalid_argument);
  EXPECT_THROW(SymMatrix(Eigen::MatrixXd(0, 0)), std::invalid_argument);
}

TEST(PdCheck, Examples) {
  const auto id = pd_check(SymMatrix::identity(2));
  ASSERT_TRUE(id);
  EXPECT_TRUE(id->lower.isApprox(Eigen::MatrixXd::Identity(2, 2)));
  EXPECT_FALSE(pd_check(sym({{1, 2}, {2, 1}})));
  const auto f = pd_check(sym({{4, 2}, {2, 2}}));
  ASSERT_TRUE(f);
  EXPECT_DOUBLE_EQ(f->lower(0, 0) * f->lower(0, 0), 4.0);
  EXPECT_NEAR(f->lower(1, 1) * f->lower(1, 1), 1.0, 1e-15);
}

TEST(PdCheck, RejectsNonFiniteAndBadTolerance) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(2, 2);
  m(0, 0) = std::nan("");
  EXPECT_THROW(pd_check(SymMatrix(m)), std::invalid_argument);
  EXPECT_THROW(pd_check(SymMatrix::identity(2), 0.0), std::invalid_argument);
}

TEST(PdCheck, ShiftedGramMatrices) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 9;
    const Eigen::MatrixXd a = testsupport::random_matrix(rng, n, n);
    const Eigen::MatrixXd g = a.transpose() * a;
    const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(g).eigenvalues().maxCoeff();
    EXPECT_TRUE(pd_check(SymMatrix(g + 1e-6 * Eigen::MatrixXd::Identity(n, n))));
    EXPECT_FALSE(pd_check(SymMatrix(g - 2.0 * lmax * Eigen::MatrixXd::Identity(n, n))));
  }
}

TEST(FaceMinimizer, Examples) {
  const std::vector<int> both{0, 1};
  const FaceResult a = face_minimizer(SymMatrix::identity(2), both);
  EXPECT_TRUE(a.pd && a.interior);
  EXPECT_NEAR(a.minimizer(0), 0.5, 1e-15);
  EXPECT_NEAR(a.value, 0.5, 1e-15);

  const FaceResult b = face_minimizer(SymMatrix::diagonal(Eigen::Vector2d(1, 4)), both);
  EXPECT_TRUE(b.pd && b.interior);
  EXPECT_NEAR(b.minimizer(0), 0.8, 1e-15);
  EXPECT_NEAR(b.minimizer(1), 0.2, 1e-15);
  EXPECT_NEAR(b.value, 0.8, 1e-15);

  const FaceResult c = face_minimizer(sym({{1, 2}, {2, 1}}), both);
  EXPECT_FALSE(c.pd);
  EXPECT_EQ(c.minimizer.size(), 0);
}

TEST(FaceMinimizer, RejectsBadIndexSets) {
  const SymMatrix q = SymMatrix::identity(3);
  const std::vector<int> out_of_range{0, 3};
  const std::vector<int> unsorted{1, 0};
  const std::vector<int> empty;
  EXPECT_THROW(face_minimizer(q, out_of_range), std::invalid_argument);
  EXPECT_THROW(face_minimizer(q, unsorted), std::invalid_argument);
  EXPECT_THROW(face_minimizer(q, empty), std::invalid_argument);
}

TEST(FaceMinimizer, GradientIsConstantOnFace) {
  std::mt19937_64 rng(5);
  for (int n = 1; n <= 20; ++n) {
    const Eigen::MatrixXd q = testsupport::random_pd(rng, n);
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    const FaceResult f = face_minimizer(SymMatrix(q), all);
    ASSERT_TRUE(f.pd);
    const Eigen::VectorXd g = 2.0 * q * f.minimizer;
    EXPECT_LE(g.maxCoeff() - g.minCoeff(), 1e-8) << "n=" << n;
    EXPECT_NEAR(f.minimizer.sum(), 1.0, 1e-10);
    EXPECT_NEAR(f.value, f.minimizer.dot(q * f.minimizer), 1e-10);
    EXPECT_NEAR(f.value, testsupport::face_value_direct(q), 1e-10 * std::max(1.0, f.value));
  }
}

TEST(FaceMinimizer, AgreesWithBoxQpWhenInterior) {
  std::mt19937_64 rng(17);
  int checked = 0;
  for (int trial = 0; trial < 200 && checked < 40; ++trial) {
    const int n = 2 + trial % 6;
    const SymMatrix q(testsupport::random_pd(rng, n));
    std::vector<int> all(n);
    for (int i = 0; i < n; ++i) all[i] = i;
    const FaceResult f = face_minimizer(q, all);
    if (!f.interior) continue;
    ++checked;
    const QpResult r = constrained_qp(simplex_box(q, 0.0, 1.0));
    ASSERT_EQ(r.status, QpStatus::Optimal);
    EXPECT_NEAR(r.value, f.value, 1e-8);
  }
  EXPECT_GE(checked, 10);
}

TEST(ConstrainedQp, Examples) {
  const QpResult a = constrained_qp(simplex_box(SymMatrix::identity(2), 0.0, 1.0));
  ASSERT_EQ(a.status, QpStatus::Optimal);
  EXPECT_NEAR(a.x(0), 0.5, 1e-12);
  EXPECT_NEAR(a.value, 0.5, 1e-12);

  const QpResult b = constrained_qp(simplex_box(SymMatrix::diagonal(Eigen::Vector2d(1, 4)), 0.3, 1.0));
  ASSERT_EQ(b.status, QpStatus::Optimal);
  EXPECT_NEAR(b.x(0), 0.7, 1e-12);
  EXPECT_NEAR(b.x(1), 0.3, 1e-12);
  EXPECT_NEAR(b.value, 0.85, 1e-12);
  EXPECT_LE(b.kkt_residual, 1e-8);
}

TEST(ConstrainedQp, InfeasibleBox) {
  const QpResult r = constrained_qp(simplex_box(SymMatrix::identity(3), 0.5, 1.0));
  EXPECT_EQ(r.status, QpStatus::Infeasible);
}

// The 3-asset cases use a dense grid with local refinement; larger cases use
// the active-set enumeration oracle.
TEST(ConstrainedQp, MatchesGridOracleInThreeDimensions) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXd q = testsupport::random_pd(rng, 3);
    const double lo = trial % 2 ? 0.1 : 0.0;
    const QpResult r = constrained_qp(simplex_box(SymMatrix(q), lo, 1.0));
    ASSERT_EQ(r.status, QpStatus::Optimal);
    const double grid = testsupport::simplex_grid_min(q, Eigen::VectorXd::Constant(3, lo), Eigen::VectorXd::Ones(3));
    EXPECT_NEAR(r.value, grid, 1e-6);
    EXPECT_LE(r.value, grid + 1e-12);
  }
}

TEST(ConstrainedQp, MatchesEnumerationOracle) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 6;
    const Eigen::MatrixXd q = testsupport::random_matrix(rng, n, n);
    const Eigen::MatrixXd psd = q.transpose() * q / n;  // may be singular-ish but PSD
    const Eigen::VectorXd lin = testsupport::random_matrix(rng, n, 1, 0.3);
    const Eigen::VectorXd lo = testsupport::random_uniform(rng, n, 0.0, 0.1);
    const Eigen::VectorXd hi = testsupport::random_uniform(rng, n, 0.4, 1.0);
    Eigen::MatrixXd a(2, n);
    a.row(0).setOnes();
    a.row(1) = testsupport::random_uniform(rng, n, -1, 1).transpose();
    const Eigen::VectorXd x0 = lo + (hi - lo) * 0.5;
    Eigen::VectorXd b = a * (x0 / x0.sum());
    b(0) = 1.0;
    const int rows = trial % 3 == 0 ? 1 : 2;
    const QpProblem p{SymMatrix(psd), lin, a.topRows(rows), b.head(rows), lo, hi};
    const QpResult r = constrained_qp(p);
    const auto ref = testsupport::qp_by_enumeration(psd, lin, a.topRows(rows), b.head(rows), lo, hi);
    ASSERT_EQ(r.status == QpStatus::Optimal, ref.feasible) << "trial " << trial;
    if (!ref.feasible) continue;
    EXPECT_NEAR(r.value, ref.value, 1e-8) << "trial " << trial;
    EXPECT_LE(r.kkt_residual, 1e-8);
  }
}
