#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string_view>
#include <vector>

#include "pcbf/errors.hpp"
#include "pcbf/linalg.hpp"

namespace pcbf {

/**
 * Dense strictly convex quadratic program
 *
 *   minimize   1/2 z' H z + f' z
 *   subject to A z <= b.
 */
struct QuadraticProgram
{
  Mat H;
  Vec f;
  Mat A;
  Vec b;

  Eigen::Index dim() const { return H.rows(); }
  Eigen::Index rows() const { return A.rows(); }

  /// Full invariant check: shapes, symmetry, and lambda_min(H) >= 1e-10.
  void validate() const
  {
    if (H.rows() != H.cols() || f.size() != H.rows()) { throw InvalidArgument("QP cost has inconsistent shape"); }
    if (A.rows() != b.size() || (A.rows() > 0 && A.cols() != H.rows())) {
      throw InvalidArgument("QP constraint rows have inconsistent shape");
    }
    require_symmetric(H);
    if (H.rows() > 0 && min_eigenvalue(H) < 1e-10) { throw InvalidArgument("QP cost is not strictly convex"); }
  }
};

enum class QpStatus { Optimal, Infeasible, IterationLimit };

inline std::string_view to_string(QpStatus s)
{
  switch (s) {
    case QpStatus::Optimal: return "Optimal";
    case QpStatus::Infeasible: return "Infeasible";
    case QpStatus::IterationLimit: return "IterationLimit";
  }
  return "Unknown";
}

struct QpSolution
{
  Vec z;
  QpStatus status = QpStatus::Optimal;
  std::vector<int> active_set;  ///< ascending row indices
  Vec multipliers;              ///< one per row, zero for inactive rows
  int iterations = 0;
  /// On Infeasible: y >= 0 with A'y = 0 and b'y < 0.
  Vec farkas;
};

struct KktResiduals
{
  double stationarity = 0.0;     ///< |H z + f + A' lambda|_inf
  double primal = 0.0;           ///< max(0, max_i (A z - b)_i)
  double complementarity = 0.0;  ///< max_i |lambda_i (A z - b)_i|
  double dual = 0.0;             ///< max(0, -min_i lambda_i)
};

inline KktResiduals kkt_residuals(const QuadraticProgram & qp, const QpSolution & sol)
{
  KktResiduals r;
  Vec grad = qp.H * sol.z + qp.f;
  if (qp.rows() > 0) {
    grad += qp.A.transpose() * sol.multipliers;
    const Vec slack = qp.A * sol.z - qp.b;
    r.primal = std::max(0.0, slack.maxCoeff());
    r.complementarity = sol.multipliers.cwiseProduct(slack).cwiseAbs().maxCoeff();
    r.dual = std::max(0.0, -sol.multipliers.minCoeff());
  }
  r.stationarity = grad.size() ? grad.cwiseAbs().maxCoeff() : 0.0;
  return r;
}

namespace detail {

/// Working state of the Goldfarb-Idnani dual active-set method.
///
/// Keeps J = L^{-T} Q and an upper-triangular R with J' N_active = [R; 0], where
/// N_active stacks the normals of the active rows written as n' z >= c.
class DualActiveSet
{
public:
  explicit DualActiveSet(const Mat & chol_l) : n_(chol_l.rows())
  {
    J_ = chol_l.transpose().triangularView<Eigen::Upper>().solve(Mat::Identity(n_, n_));
    R_ = Mat::Zero(n_, n_);
  }

  Eigen::Index size() const { return q_; }

  /// d = J' n
  Vec project(const Vec & normal) const { return J_.transpose() * normal; }

  /// Primal step direction J2 d2.
  Vec primal_direction(const Vec & d) const
  {
    if (q_ == n_) { return Vec::Zero(n_); }
    return J_.rightCols(n_ - q_) * d.tail(n_ - q_);
  }

  /// Dual step direction R^{-1} d1.
  Vec dual_direction(const Vec & d) const
  {
    if (q_ == 0) { return Vec(0); }
    return R_.topLeftCorner(q_, q_).triangularView<Eigen::Upper>().solve(d.head(q_));
  }

  void add(Vec d)
  {
    for (Eigen::Index j = n_ - 1; j > q_; --j) {
      const double h = std::hypot(d(j - 1), d(j));
      if (h == 0.0) { continue; }
      const double c = d(j - 1) / h;
      const double s = d(j) / h;
      d(j - 1) = h;
      d(j) = 0.0;
      for (Eigen::Index k = 0; k < n_; ++k) {
        const double a = J_(k, j - 1);
        const double b = J_(k, j);
        J_(k, j - 1) = c * a + s * b;
        J_(k, j) = -s * a + c * b;
      }
    }
    R_.col(q_).head(q_ + 1) = d.head(q_ + 1);
    ++q_;
  }

  void drop(Eigen::Index l)
  {
    for (Eigen::Index j = l; j + 1 < q_; ++j) { R_.col(j).head(j + 2) = R_.col(j + 1).head(j + 2); }
    R_.col(q_ - 1).setZero();
    for (Eigen::Index j = l; j + 1 < q_; ++j) {
      const double h = std::hypot(R_(j, j), R_(j + 1, j));
      if (h == 0.0) { continue; }
      const double c = R_(j, j) / h;
      const double s = R_(j + 1, j) / h;
      for (Eigen::Index k = j; k + 1 < q_; ++k) {
        const double a = R_(j, k);
        const double b = R_(j + 1, k);
        R_(j, k) = c * a + s * b;
        R_(j + 1, k) = -s * a + c * b;
      }
      R_(j + 1, j) = 0.0;
      for (Eigen::Index k = 0; k < n_; ++k) {
        const double a = J_(k, j);
        const double b = J_(k, j + 1);
        J_(k, j) = c * a + s * b;
        J_(k, j + 1) = -s * a + c * b;
      }
    }
    --q_;
  }

private:
  Eigen::Index n_;
  Eigen::Index q_ = 0;
  Mat J_;
  Mat R_;
};

}  // namespace detail

/**
 * Solves a dense strictly convex QP with the Goldfarb-Idnani dual active-set
 * method.
 *
 * Starts from the unconstrained minimizer and repeatedly adds the most violated
 * row (lowest index on ties), dropping rows whose multipliers would turn
 * negative. A row that cannot be added while violated by at most 1e-9 is set
 * aside and rechecked at the end. Infeasibility is reported with a Farkas
 * certificate. Returns IterationLimit after 50 * (d + m) iterations.
 */
inline QpSolution solve_qp(const QuadraticProgram & qp)
{
  const Eigen::Index n = qp.dim();
  const Eigen::Index m = qp.rows();
  if (qp.f.size() != n || qp.b.size() != m || (m > 0 && qp.A.cols() != n)) {
    throw InvalidArgument("QP has inconsistent shape");
  }

  QpSolution sol;
  sol.multipliers = Vec::Zero(m);

  Eigen::LLT<Mat> llt(qp.H);
  if (llt.info() != Eigen::Success) { throw InvalidArgument("QP cost is not positive definite"); }
  Vec x = llt.solve(-qp.f);
  if (m == 0) {
    sol.z = x;
    return sol;
  }

  detail::DualActiveSet ws(llt.matrixL());
  std::vector<int> active;
  std::vector<double> u;
  std::vector<char> is_active(static_cast<std::size_t>(m), 0);

  const long limit = 50L * static_cast<long>(n + m);
  const double eps = std::numeric_limits<double>::epsilon();

  auto finish = [&](QpStatus status) {
    sol.z = x;
    sol.status = status;
    for (std::size_t j = 0; j < active.size(); ++j) { sol.multipliers(active[j]) = std::max(0.0, u[j]); }
    sol.active_set = active;
    std::sort(sol.active_set.begin(), sol.active_set.end());
    return sol;
  };

  const Vec row_scale = m > 0 ? Vec(qp.A.cwiseAbs().rowwise().maxCoeff()) : Vec();
  std::vector<int> parked;
  const double feas_tol = 1e-9;
  Vec slacks(m);

  for (;;) {
    // Step 1: pick the most violated inactive row.
    int p = -1;
    double worst = 0.0;
    if (m > 0) { slacks.noalias() = qp.b - qp.A * x; }
    const double x_scale = x.size() ? x.cwiseAbs().maxCoeff() : 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      if (is_active[static_cast<std::size_t>(i)]) { continue; }
      const double slack = slacks(i);
      const double tol = 1e-12 * (1.0 + std::abs(qp.b(i)) + row_scale(i) * x_scale);
      if (slack < -tol && slack < worst) {
        worst = slack;
        p = static_cast<int>(i);
      }
    }
    if (p < 0) {
      for (int i : parked) {
        if (slacks(i) < -feas_tol) { return finish(QpStatus::Infeasible); }
      }
      sol.farkas.resize(0);
      return finish(QpStatus::Optimal);
    }

    const Vec normal = -qp.A.row(p).transpose();
    double u_plus = 0.0;
    const Vec x0 = x;
    const auto active0 = active;
    const auto u0 = u;
    const auto is_active0 = is_active;
    const auto ws0 = ws;

    // Step 2: move toward satisfying row p.
    for (;;) {
      if (++sol.iterations > limit) { return finish(QpStatus::IterationLimit); }
      const double s_p = normal.dot(x) + qp.b(p);  // n'x - c with c = -b_p
      const Vec d = ws.project(normal);
      const Vec z = ws.primal_direction(d);
      const Vec r = ws.dual_direction(d);

      double t1 = std::numeric_limits<double>::infinity();
      Eigen::Index l = -1;
      for (Eigen::Index j = 0; j < r.size(); ++j) {
        if (r(j) > 0.0) {
          const double ratio = u[static_cast<std::size_t>(j)] / r(j);
          if (ratio < t1) {
            t1 = ratio;
            l = j;
          }
        }
      }

      const double curvature = z.dot(normal);
      const bool has_step = curvature > 1e3 * eps * d.squaredNorm();
      const double t2 = has_step ? -s_p / curvature : std::numeric_limits<double>::infinity();

      if (!has_step && l < 0) {
        sol.farkas = Vec::Zero(m);
        sol.farkas(p) = 1.0;
        for (std::size_t j = 0; j < active.size(); ++j) {
          sol.farkas(active[j]) = std::max(0.0, -r(static_cast<Eigen::Index>(j)));
        }
        if (-s_p > feas_tol) { return finish(QpStatus::Infeasible); }
        // within the feasibility tolerance: undo the partial steps, park the row and keep going
        x = x0;
        active = active0;
        u = u0;
        is_active = is_active0;
        ws = ws0;
        is_active[static_cast<std::size_t>(p)] = 2;
        parked.push_back(p);
        break;
      }

      const double t = std::min(t1, t2);
      if (has_step) { x += t * z; }
      for (Eigen::Index j = 0; j < r.size(); ++j) { u[static_cast<std::size_t>(j)] -= t * r(j); }
      u_plus += t;

      if (has_step && t2 <= t1) {
        ws.add(d);
        active.push_back(p);
        u.push_back(u_plus);
        is_active[static_cast<std::size_t>(p)] = 1;
        break;
      }

      is_active[static_cast<std::size_t>(active[static_cast<std::size_t>(l)])] = 0;
      active.erase(active.begin() + l);
      u.erase(u.begin() + l);
      ws.drop(l);
    }
  }
}

}  // namespace pcbf
