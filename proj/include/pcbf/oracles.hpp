#pragma once

#include <Eigen/LU>

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "pcbf/qp.hpp"
#include "pcbf/random.hpp"

namespace pcbf::oracle {

/**
 * Exhaustive active-set enumeration for small strictly convex QPs: for every
 * subset S of rows solve the equality-constrained KKT system and keep the
 * cheapest point that is primal feasible with nonnegative multipliers.
 * Returns nullopt when no subset yields a feasible KKT point (infeasible QP).
 */
inline std::optional<Vec> brute_force_qp(const QuadraticProgram & qp, double tol = 1e-9)
{
  const Eigen::Index d = qp.dim();
  const Eigen::Index m = qp.rows();
  if (m > 20) { throw InvalidArgument("brute_force_qp is limited to 20 rows"); }
  std::optional<Vec> best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (mask & (1u << i)) { rows.push_back(i); }
    }
    const auto s = static_cast<Eigen::Index>(rows.size());
    if (s > d) { continue; }
    Mat kkt = Mat::Zero(d + s, d + s);
    Vec rhs(d + s);
    kkt.topLeftCorner(d, d) = qp.H;
    rhs.head(d) = -qp.f;
    for (Eigen::Index j = 0; j < s; ++j) {
      kkt.block(0, d + j, d, 1) = qp.A.row(rows[static_cast<std::size_t>(j)]).transpose();
      kkt.block(d + j, 0, 1, d) = qp.A.row(rows[static_cast<std::size_t>(j)]);
      rhs(d + j) = qp.b(rows[static_cast<std::size_t>(j)]);
    }
    Eigen::FullPivLU<Mat> lu(kkt);
    if (!lu.isInvertible()) { continue; }
    const Vec sol = lu.solve(rhs);
    const Vec z = sol.head(d);
    if (s > 0 && sol.tail(s).minCoeff() < -tol) { continue; }
    if (m > 0 && (qp.A * z - qp.b).maxCoeff() > tol * (1.0 + qp.b.cwiseAbs().maxCoeff())) { continue; }
    const double cost = 0.5 * z.dot(qp.H * z) + qp.f.dot(z);
    if (cost < best_cost) {
      best_cost = cost;
      best = z;
    }
  }
  return best;
}

/**
 * Random strictly convex QP with d in [1, max_d] and m in [0, max_m].
 * About one in ten instances is made infeasible by a contradictory row pair.
 */
inline QuadraticProgram random_qp(Rng & rng, int max_d = 4, int max_m = 6)
{
  const int d = 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_d));
  const int m = static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_m + 1));
  QuadraticProgram qp;
  Mat g(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) { g(i, j) = rng.normal(); }
  }
  qp.H = g.transpose() * g + 0.1 * Mat::Identity(d, d);
  qp.f = Vec(d);
  for (int i = 0; i < d; ++i) { qp.f(i) = 3.0 * rng.normal(); }
  qp.A = Mat(m, d);
  qp.b = Vec(m);
  Vec z0(d);
  for (int i = 0; i < d; ++i) { z0(i) = rng.normal(); }
  for (int r = 0; r < m; ++r) {
    for (int j = 0; j < d; ++j) { qp.A(r, j) = rng.normal(); }
    qp.b(r) = qp.A.row(r).dot(z0) + rng.uniform(0.0, 1.0);
  }
  if (m >= 2 && rng.uniform() < 0.1) {
    qp.A.row(1) = -qp.A.row(0);
    qp.b(1) = -qp.b(0) - 0.5;
  }
  return qp;
}

/// Min over obstacles of |p - z_i| - R_i - R for a planar position p.
template<class Obstacles>
double geometric_clearance(const Eigen::Vector2d & p, const Obstacles & obstacles, double robot_radius)
{
  double best = std::numeric_limits<double>::infinity();
  for (const auto & o : obstacles) { best = std::min(best, (p - o.center).norm() - o.radius - robot_radius); }
  return best;
}

}  // namespace pcbf::oracle
