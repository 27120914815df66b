#pragma once

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <array>
#include <cmath>
#include <complex>
#include <vector>

#include "pcbf/cbf_types.hpp"
#include "pcbf/filter.hpp"
#include "pcbf/lmi.hpp"
#include "pcbf/log.hpp"
#include "pcbf/sim.hpp"

namespace pcbf::linear {

struct Constants
{
  Mat A{{0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}, {0.0, 0.0, 0.0}};
  Vec B = Vec::Unit(3, 2);
  Vec c = Vec::Unit(3, 1);
  Mat S{{2.0, 2.0, 1.0}, {2.0, 3.0, 2.0}, {1.0, 2.0, 2.0}};
  double mu = 0.1;
  double nu = 10.0;
  double alpha_clf = 5.0;
  double alpha_h = 5.0;
  double gamma = 5.0;
  double u_bound = 1.0;
  Vec x0 = Vec{{5.0, 0.0, 0.0}};
};

/// k = (b, L (1 x n), upper triangle of P row by row).
struct Parameter
{
  double b = 0.0;
  Vec L;
  Mat P;
};

inline int n_k_for(int n) { return 1 + n + n * (n + 1) / 2; }

inline Vec pack(const Parameter & p)
{
  const auto n = p.L.size();
  Vec k(n_k_for(static_cast<int>(n)));
  k(0) = p.b;
  k.segment(1, n) = p.L;
  Eigen::Index at = 1 + n;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) { k(at++) = p.P(i, j); }
  }
  return k;
}

inline Parameter unpack(const Vec & k, int n)
{
  Parameter p;
  p.b = k(0);
  p.L = k.segment(1, n);
  p.P.resize(n, n);
  Eigen::Index at = 1 + n;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) { p.P(i, j) = p.P(j, i) = k(at++); }
  }
  return p;
}

inline Dynamics dynamics(const Constants & c = {})
{
  Dynamics d;
  d.n = static_cast<int>(c.A.rows());
  d.m = 1;
  d.f = [A = c.A](const Vec & x) -> Vec { return A * x; };
  d.g = [B = c.B](const Vec &) -> Mat { return B; };
  d.jac_f = [A = c.A](const Vec &) -> Mat { return A; };
  d.jac_g = [n = c.A.rows()](const Vec &) { return std::vector<Mat>(static_cast<std::size_t>(n), Mat::Zero(n, 1)); };
  return d;
}

/// h = b - x^T P x / 2.
inline BarrierValue h_value(const Vec & x, const Vec & k, int n)
{
  const Parameter p = unpack(k, n);
  BarrierValue out;
  out.value = p.b - 0.5 * x.dot(p.P * x);
  out.grad_x = -(p.P * x);
  out.grad_k = Vec::Zero(k.size());
  out.grad_k(0) = 1.0;
  Eigen::Index at = 1 + n;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i; j < n; ++j) { out.grad_k(at++) = i == j ? -0.5 * x(i) * x(i) : -x(i) * x(j); }
  }
  return out;
}

/// rho_1 = -P (A - B L) - (A - B L)^T P.
inline Mat rho1(const Constants & c, const Parameter & p)
{
  const Mat Acl = c.A - c.B * p.L.transpose();
  return -(p.P * Acl) - Acl.transpose() * p.P;
}

/// rho_2 = P - 2 b L^T L.
inline Mat rho2(const Parameter & p) { return p.P - 2.0 * p.b * p.L * p.L.transpose(); }

/// rho_3 = P - 2 b c c^T.
inline Mat rho3(const Constants & c, const Parameter & p) { return p.P - 2.0 * p.b * c.c * c.c.transpose(); }

inline Mat d_rho1(const Constants & c, const Parameter & p, const Parameter & dp)
{
  const Mat Acl = c.A - c.B * p.L.transpose();
  const Mat pbl = p.P * c.B * dp.L.transpose();
  return -(dp.P * Acl) - Acl.transpose() * dp.P + pbl + pbl.transpose();
}

inline Mat d_rho2(const Parameter & p, const Parameter & dp)
{
  const Mat cross = dp.L * p.L.transpose();
  return dp.P - 2.0 * dp.b * p.L * p.L.transpose() - 2.0 * p.b * (cross + cross.transpose());
}

inline Mat d_rho3(const Constants & c, const Parameter & dp) { return dp.P - 2.0 * dp.b * c.c * c.c.transpose(); }

inline ParamConstraintSet params(const Constants & c = {})
{
  const int n = static_cast<int>(c.A.rows());
  ParamConstraintSet set;
  set.matrix.push_back({[c, n](const Vec & k) { return rho1(c, unpack(k, n)); },
                        [c, n](const Vec & k, const Vec & v) { return d_rho1(c, unpack(k, n), unpack(v, n)); }, c.gamma});
  set.matrix.push_back({[n](const Vec & k) { return rho2(unpack(k, n)); },
                        [n](const Vec & k, const Vec & v) { return d_rho2(unpack(k, n), unpack(v, n)); }, c.gamma});
  set.matrix.push_back({[c, n](const Vec & k) { return rho3(c, unpack(k, n)); },
                        [c, n](const Vec &, const Vec & v) { return d_rho3(c, unpack(v, n)); }, c.gamma});
  return set;
}

inline ClfValue clf(const Constants & c, const Vec & x) { return {0.5 * x.dot(c.S * x), c.S * x}; }

/// Continuous-time LQR gain from the stable invariant subspace of the Hamiltonian.
inline Vec lqr_gain(const Mat & A, const Vec & B, const Mat & Q, double r)
{
  const auto n = A.rows();
  Mat H(2 * n, 2 * n);
  H << A, -(B * B.transpose()) / r, -Q, -A.transpose();
  Eigen::ComplexEigenSolver<Mat> es(H);
  if (es.info() != Eigen::Success) { throw InitFailed("Hamiltonian eigendecomposition failed"); }
  Eigen::MatrixXcd stable(2 * n, n);
  Eigen::Index cols = 0;
  for (Eigen::Index i = 0; i < 2 * n; ++i) {
    if (es.eigenvalues()(i).real() < 0.0 && cols < n) { stable.col(cols++) = es.eigenvectors().col(i); }
  }
  if (cols != n) { throw InitFailed("Hamiltonian has eigenvalues on the imaginary axis"); }
  const Eigen::MatrixXcd X1 = stable.topRows(n);
  const Eigen::MatrixXcd X2 = stable.bottomRows(n);
  Mat P = (X2 * X1.inverse()).real();
  P = 0.5 * (P + P.transpose()).eval();
  return B.transpose() * P / r;
}

/// Solves Acl^T P + P Acl = -Q by Kronecker vectorization.
inline Mat lyapunov(const Mat & Acl, const Mat & Q)
{
  const auto n = Acl.rows();
  const Mat I = Mat::Identity(n, n);
  Mat K = Mat::Zero(n * n, n * n);
  // vec(Acl^T P) = (I kron Acl^T) vec P, vec(P Acl) = (Acl^T kron I) vec P
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      K.block(i * n, j * n, n, n) += I(i, j) * Acl.transpose();
      K.block(i * n, j * n, n, n) += Acl(j, i) * I;
    }
  }
  const Vec rhs = -Eigen::Map<const Vec>(Q.data(), n * n);
  const Vec p = K.fullPivLu().solve(rhs);
  Mat P = Eigen::Map<const Mat>(p.data(), n, n);
  return 0.5 * (P + P.transpose());
}

struct InitReport
{
  Vec k;
  double r_lqr = 1.0;
  int attempts = 0;
  std::array<double, 3> lambda_min{};
  double h0 = 0.0;
};

/**
 * Initial parameter: L from LQR (Q = I, R = r_lqr), P-hat from the closed-loop
 * Lyapunov equation, then (b, P) projected onto
 *   rho_1, rho_2, rho_3 >= 0,  b - x0^T P x0 / 2 >= 1e-3,  P >= 1e-6 I.
 * On infeasibility r_lqr is multiplied by 10, up to 5 retries.
 */
inline InitReport init(const Constants & c = {})
{
  const int n = static_cast<int>(c.A.rows());
  const int n_p = n * (n + 1) / 2;
  const int d = 1 + n_p;
  std::string last_failure = "not attempted";
  double r = 1.0;
  for (int attempt = 0; attempt <= 5; ++attempt, r *= 10.0) {
    const Vec L = lqr_gain(c.A, c.B, Mat::Identity(n, n), r);
    const Mat P_hat = lyapunov(c.A - c.B * L.transpose(), Mat::Identity(n, n));
    const double b_hat = 0.5 * c.x0.dot(P_hat * c.x0);

    // z = (b, upper triangle of P); embed as k with L fixed for evaluating the constraints
    auto k_of = [&](const Vec & z) {
      Vec k(n_k_for(n));
      k(0) = z(0);
      k.segment(1, n) = L;
      k.tail(n_p) = z.tail(n_p);
      return k;
    };
    auto param_of = [&](const Vec & z) { return unpack(k_of(z), n); };

    Vec z_hat(d);
    z_hat(0) = b_hat;
    z_hat.tail(n_p) = pack({0.0, L, P_hat}).tail(n_p);

    QuadraticProgram qp;
    qp.H = 2.0 * Mat::Identity(d, d);
    qp.f = -2.0 * z_hat;
    // -b + x0^T P x0 / 2 <= -1e-3
    qp.A = Mat::Zero(1, d);
    qp.A(0, 0) = -1.0;
    {
      const Vec g = h_value(c.x0, k_of(Vec::Zero(d)), n).grad_k;
      qp.A.block(0, 1, 1, n_p) = -g.tail(n_p).transpose();
    }
    qp.b = Vec::Constant(1, -1e-3);

    // Every constraint is affine in z: M(z) = M(0) + sum_j z_j M(e_j).
    std::vector<std::function<Mat(const Parameter &)>> maps{
      [&](const Parameter & p) { return rho1(c, p); },
      [&](const Parameter & p) { return rho2(p); },
      [&](const Parameter & p) { return rho3(c, p); },
      [&](const Parameter & p) { return Mat(p.P); },
    };
    std::vector<LmiConstraint> lmis;
    for (std::size_t i = 0; i < maps.size(); ++i) {
      LmiConstraint lmi;
      const Mat base = maps[i](param_of(Vec::Zero(d)));
      lmi.base = i == 3 ? Mat(base - 1e-6 * Mat::Identity(n, n)) : base;
      for (int j = 0; j < d; ++j) { lmi.coeffs.push_back(maps[i](param_of(Vec::Unit(d, j))) - base); }
      lmis.push_back(std::move(lmi));
    }

    LmiSolveResult res;
    try {
      res = solve_qp_with_lmi(qp, lmis, 1e-10, 5000);
    } catch (const CutBudgetExceeded & e) {
      last_failure = e.what();
      log().info("linear init: r_lqr={} cut budget exceeded", r);
      continue;
    }
    if (res.qp.status != QpStatus::Optimal) {
      last_failure = "projection infeasible, lambda_min deficits";
      for (double lam : res.lambda_min) { last_failure += " " + std::to_string(lam); }
      log().info("linear init: r_lqr={} projection {}", r, to_string(res.qp.status));
      continue;
    }

    const Vec k = k_of(res.qp.z);
    const Parameter p = unpack(k, n);
    InitReport rep;
    rep.k = k;
    rep.r_lqr = r;
    rep.attempts = attempt + 1;
    rep.lambda_min = {min_eigenvalue(rho1(c, p)), min_eigenvalue(rho2(p)), min_eigenvalue(rho3(c, p))};
    rep.h0 = h_value(c.x0, k, n).value;
    return rep;
  }
  throw InitFailed("linear init failed after retries: " + last_failure);
}

/**
 * u = -B^T S x. S solves the Riccati equation with R = 1 and Q = S B B^T S - A^T S - S A,
 * so this LQR law has V = x^T S x / 2 as its value function. No input bound.
 */
inline double lqr_baseline(const Constants & c, const Vec & x) { return -c.B.dot(c.S * x); }

class LinearScenario
{
public:
  explicit LinearScenario(Constants c = {}) : c_(std::move(c)), dyn_(linear::dynamics(c_)), params_(linear::params(c_))
  {
    init_ = init(c_);
  }

  const Constants & constants() const { return c_; }
  const Dynamics & dynamics() const { return dyn_; }
  const ParamConstraintSet & params() const { return params_; }
  const InitReport & init_report() const { return init_; }
  int n() const { return dyn_.n; }

  Pcbf pcbf() const
  {
    const int n = dyn_.n;
    return Pcbf{n_k_for(n), [n](const Vec & x, const Vec & k) { return h_value(x, k, n); }, ClassK::linear(c_.alpha_h)};
  }

  InputPolytope input() const { return InputPolytope::box(Vec::Constant(1, -c_.u_bound), Vec::Constant(1, c_.u_bound)); }

  FilterConfig filter_config() const
  {
    FilterConfig cfg;
    cfg.mu = c_.mu;
    cfg.nu = c_.nu;
    cfg.alpha_clf = ClassK::linear(c_.alpha_clf);
    return cfg;
  }

  Vec initial_state() const { return c_.x0; }
  Vec initial_parameter() const { return init_.k; }

  Vec phi_values(const Vec & x, const Vec & k) const { return Vec::Constant(1, h_value(x, k, dyn_.n).value); }

  /// lambda_min of rho_1, rho_2, rho_3.
  Vec rho_values(const Vec & k, double) const
  {
    Vec out(3);
    for (int i = 0; i < 3; ++i) { out(i) = min_eigenvalue(params_.matrix[static_cast<std::size_t>(i)].rho(k)); }
    return out;
  }

  /// Output margin 1 - |c^T x|.
  double clearance(const Vec & x, const Vec &, double) const { return 1.0 - std::abs(c_.c.dot(x)); }

private:
  Constants c_;
  Dynamics dyn_;
  ParamConstraintSet params_;
  InitReport init_;
};

/// CLF-PCBF-QP with the scenario's CLF.
class ClfPcbfController
{
public:
  explicit ClfPcbfController(const LinearScenario & sc)
      : filter_(sc.pcbf().as_hopcbf(), sc.dynamics(), sc.input(), sc.params(), sc.filter_config()), c_(sc.constants())
  {}

  ControlAction operator()(const Vec & x, const Vec & k, double t)
  {
    last_ = filter_.clf_step(clf(c_, x), x, k, t);
    const double lam_p = min_eigenvalue(unpack(k, static_cast<int>(x.size())).P);
    if (lam_p < 1e-9) { log().warn("t={:.4f}: lambda_min(P) = {:.3e}", t, lam_p); }
    ControlAction a;
    a.u_ref = Vec::Zero(1);
    a.u = last_.u;
    a.v = last_.v;
    a.slack = last_.slack;
    a.qp_iterations = last_.qp.iterations;
    a.qp_status = last_.qp.status;
    return a;
  }

  const FilterOutput & last() const { return last_; }

private:
  SafetyFilter filter_;
  Constants c_;
  FilterOutput last_;
};

class LqrBaselineController
{
public:
  explicit LqrBaselineController(const LinearScenario & sc) : c_(sc.constants()) {}

  ControlAction operator()(const Vec & x, const Vec &, double)
  {
    ControlAction a;
    a.u = Vec::Constant(1, lqr_baseline(c_, x));
    a.u_ref = a.u;
    a.v = Vec();
    return a;
  }

private:
  Constants c_;
};

}  // namespace pcbf::linear
