#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "pcbf/lmi.hpp"
#include "pcbf/oracles.hpp"
#include "pcbf/qp.hpp"

using namespace pcbf;

namespace {

QuadraticProgram program(Mat H, Vec f, Mat A = Mat(0, 0), Vec b = Vec(0))
{
  QuadraticProgram qp{std::move(H), std::move(f), std::move(A), std::move(b)};
  if (qp.A.rows() == 0) { qp.A.resize(0, qp.H.rows()); }
  return qp;
}

/// Roots of det(lambda I - M) from the Faddeev-LeVerrier coefficients and a companion matrix.
Vec companion_eigenvalues(const Mat & m)
{
  const auto n = m.rows();
  Vec c(n + 1);
  c(n) = 1.0;
  Mat mk = Mat::Zero(n, n);
  for (Eigen::Index k = 1; k <= n; ++k) {
    mk = m * mk + c(n - k + 1) * Mat::Identity(n, n);
    c(n - k) = -(m * mk).trace() / static_cast<double>(k);
  }
  Mat comp = Mat::Zero(n, n);
  comp.bottomLeftCorner(n - 1, n - 1).setIdentity();
  for (Eigen::Index i = 0; i < n; ++i) { comp(i, n - 1) = -c(i); }
  Eigen::EigenSolver<Mat> es(comp);
  Vec out = es.eigenvalues().real();
  std::sort(out.data(), out.data() + n);
  return out;
}

}  // namespace

TEST(SolveQp, UnconstrainedIdentity)
{
  const auto sol = solve_qp(program(Mat::Identity(2, 2), Vec::Zero(2)));
  EXPECT_EQ(sol.status, QpStatus::Optimal);
  EXPECT_LT(sol.z.norm(), 1e-15);
}

TEST(SolveQp, SingleActiveRow)
{
  const auto qp = program(Mat{{1.0}}, Vec{{-1.0}}, Mat{{1.0}}, Vec{{0.5}});
  const auto sol = solve_qp(qp);
  ASSERT_EQ(sol.status, QpStatus::Optimal);
  EXPECT_NEAR(sol.z(0), 0.5, 1e-14);
  EXPECT_NEAR(sol.multipliers(0), 0.5, 1e-14);
  EXPECT_EQ(sol.active_set, std::vector<int>{0});
  EXPECT_NEAR(oracle::brute_force_qp(qp)->coeff(0), 0.5, 1e-14);
}

TEST(SolveQp, FeasibilityTolerance)
{
  // z >= 1e-12 + 1e-11 and z <= 1e-11: empty, but only by 1e-12
  const auto near = solve_qp(program(Mat{{1.0}}, Vec{{0.0}}, Mat{{-1.0}, {1.0}}, Vec{{-1.1e-11}, {1e-11}}));
  ASSERT_EQ(near.status, QpStatus::Optimal);
  EXPECT_LE(std::max(1.1e-11 - near.z(0), near.z(0) - 1e-11), 1e-9);

  const auto far = solve_qp(program(Mat{{1.0}}, Vec{{0.0}}, Mat{{-1.0}, {1.0}}, Vec{{-1e-6}, {0.0}}));
  ASSERT_EQ(far.status, QpStatus::Infeasible);
  EXPECT_LT((Vec{{-1e-6, 0.0}}).dot(far.farkas), 0.0);
}

TEST(SolveQp, MatchesEnumerationOnRandomInstances)
{
  Rng rng(42);
  int infeasible = 0;
  for (int i = 0; i < 300; ++i) {
    const auto qp = oracle::random_qp(rng);
    const auto sol = solve_qp(qp);
    const auto ref = oracle::brute_force_qp(qp);
    if (!ref) {
      ++infeasible;
      ASSERT_EQ(sol.status, QpStatus::Infeasible) << "instance " << i;
      EXPECT_GE(sol.farkas.minCoeff(), 0.0);
      EXPECT_LT((qp.A.transpose() * sol.farkas).norm(), 1e-8);
      EXPECT_LT(qp.b.dot(sol.farkas), 0.0);
      continue;
    }
    ASSERT_EQ(sol.status, QpStatus::Optimal) << "instance " << i;
    EXPECT_LT((sol.z - *ref).cwiseAbs().maxCoeff(), 1e-6) << "instance " << i;
    const auto r = kkt_residuals(qp, sol);
    EXPECT_LE(std::max({r.stationarity, r.primal, r.complementarity, r.dual}), 1e-8) << "instance " << i;
  }
  EXPECT_GT(infeasible, 0);
}

TEST(SolveQp, RejectsIndefiniteCost)
{
  EXPECT_THROW(solve_qp(program(Mat{{1.0, 0.0}, {0.0, -1.0}}, Vec::Zero(2))), InvalidArgument);
}

TEST(SolveQpWithLmi, NoLmisMatchesPlainSolve)
{
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    const auto qp = oracle::random_qp(rng);
    const auto plain = solve_qp(qp);
    const auto res = solve_qp_with_lmi(qp, {});
    ASSERT_EQ(plain.status, res.qp.status);
    if (plain.status == QpStatus::Optimal) { EXPECT_EQ(plain.z, res.qp.z); }
    EXPECT_TRUE(res.cuts.cuts.empty());
  }
}

TEST(SolveQpWithLmi, DiagonalProjection)
{
  // minimize 1/2 (z1 + 1)^2 + 1/2 z2^2 subject to diag(z1, 1) >= 0
  const auto qp = program(Mat::Identity(2, 2), Vec{{1.0, 0.0}});
  LmiConstraint lmi;
  lmi.base = Mat{{0.0, 0.0}, {0.0, 1.0}};
  lmi.coeffs = {Mat{{1.0, 0.0}, {0.0, 0.0}}, Mat::Zero(2, 2)};
  const std::vector<LmiConstraint> lmis{lmi};
  const auto res = solve_qp_with_lmi(qp, lmis, 1e-8);
  ASSERT_EQ(res.qp.status, QpStatus::Optimal);
  EXPECT_NEAR(res.qp.z(0), 0.0, 1e-8);
  EXPECT_GE(res.lambda_min[0], -1e-8);
  EXPECT_GE(res.new_cuts, 1);
}

TEST(SolveQpWithLmi, RandomLmisAreSatisfiedPostSolve)
{
  Rng rng(11);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 3;
    auto qp = program(Mat::Identity(d, d), Vec::Zero(d));
    for (int i = 0; i < d; ++i) { qp.f(i) = 3.0 * rng.normal(); }
    LmiConstraint lmi;
    lmi.base = Mat::Identity(3, 3);
    for (int j = 0; j < d; ++j) {
      Mat g(3, 3);
      for (int r = 0; r < 3; ++r) {
        for (int c = 0; c < 3; ++c) { g(r, c) = rng.normal(); }
      }
      lmi.coeffs.push_back(0.5 * (g + g.transpose()));
    }
    const std::vector<LmiConstraint> lmis{lmi};
    const auto res = solve_qp_with_lmi(qp, lmis, 1e-9, 400);
    ASSERT_EQ(res.qp.status, QpStatus::Optimal);
    const Mat m = lmi.evaluate(res.qp.z);
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    EXPECT_GE(es.eigenvalues()(0), -1e-8);
    for (int s = 0; s < 1000; ++s) {
      Vec xi(3);
      for (int i = 0; i < 3; ++i) { xi(i) = rng.normal(); }
      xi.normalize();
      ASSERT_GE(xi.dot(m * xi), -1e-8);
    }
  }
}

TEST(SolveQpWithLmi, CutBudget)
{
  const auto qp = program(Mat::Identity(2, 2), Vec{{1.0, 1.0}});
  LmiConstraint lmi;
  lmi.base = Mat{{0.0, 0.0}, {0.0, 0.0}};
  lmi.coeffs = {Mat{{1.0, 0.0}, {0.0, 0.0}}, Mat{{0.0, 1.0}, {1.0, 0.0}}};
  const std::vector<LmiConstraint> lmis{lmi};
  EXPECT_THROW(solve_qp_with_lmi(qp, lmis, 1e-12, 0), CutBudgetExceeded);
}

TEST(JacobiEigen, Diagonal)
{
  const auto p = min_eigenpair(Mat{{2.0, 0.0}, {0.0, 1.0}});
  EXPECT_DOUBLE_EQ(p.value, 1.0);
  EXPECT_NEAR(std::abs(p.vector(1)), 1.0, 1e-15);
  EXPECT_NEAR(p.vector(0), 0.0, 1e-15);
}

TEST(JacobiEigen, Swap)
{
  const auto p = min_eigenpair(Mat{{0.0, 1.0}, {1.0, 0.0}});
  EXPECT_NEAR(p.value, -1.0, 1e-15);
  const double s = std::numbers::sqrt2 / 2.0;
  EXPECT_NEAR(std::abs(p.vector(0)), s, 1e-15);
  EXPECT_NEAR(p.vector(0), -p.vector(1), 1e-15);
}

TEST(JacobiEigen, RandomMatchesCompanionRoots)
{
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Mat g(5, 5);
    for (int r = 0; r < 5; ++r) {
      for (int c = 0; c < 5; ++c) { g(r, c) = rng.uniform(-1.0, 1.0); }
    }
    const Mat m = 0.5 * (g + g.transpose());
    const auto eig = jacobi_eigen(m);
    const Vec ref = companion_eigenvalues(m);
    EXPECT_LT((eig.values - ref).cwiseAbs().maxCoeff(), 1e-8);
    EXPECT_LT((m * eig.vectors - eig.vectors * eig.values.asDiagonal()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LT((eig.vectors.transpose() * eig.vectors - Mat::Identity(5, 5)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(JacobiEigen, RejectsAsymmetric)
{
  EXPECT_THROW(jacobi_eigen(Mat{{0.0, 1.0}, {0.0, 0.0}}), NonSymmetric);
}
