#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

#include "pcbf/cbf_types.hpp"
#include "pcbf/filter.hpp"
#include "pcbf/random.hpp"
#include "pcbf/scenarios/se2.hpp"
#include "pcbf/sim.hpp"

namespace pcbf::rover {

/// Parameter layout k = (b, p1, p2, psi, eta_1 .. eta_N).
namespace idx {
inline constexpr int b = 0;
inline constexpr int p1 = 1;
inline constexpr int p2 = 2;
inline constexpr int psi = 3;
inline constexpr int eta0 = 4;
}  // namespace idx

struct Obstacle
{
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  double radius = 0.5;
};

struct Constants
{
  double robot_radius = 0.3;
  double eps = 0.01;
  int n_obstacles = 15;
  double alpha_slope = 2.0;
  double beta_slope = 2.0;
  double mu = 0.01;
  double b0 = 0.5;
  double field_half_width = 8.0;
  double radius_min = 0.3;
  double radius_max = 1.0;
  double start_margin = 0.2;
};

inline Se2Element pose_of(const Vec & k) { return {{k(idx::p1), k(idx::p2)}, k(idx::psi)}; }

inline Vec make_parameter(double b, const Se2Element & q, const Vec & eta)
{
  Vec k(idx::eta0 + eta.size());
  k << b, q.p, q.psi, eta;
  return k;
}

/// Radius of the x1-x2 projection of {V <= b} along the body x1 axis.
inline double level_radius(double b, double eps) { return std::sqrt(std::max(0.0, b * b + 2.0 * b * eps)); }

/// Lyapunov function V(y) and its gradient.
inline std::pair<double, Eigen::Vector4d> lyapunov(const Vec & y, double eps)
{
  const double s = std::sqrt(y(0) * y(0) + 4.0 * y(1) * y(1) + eps * eps);
  const double v = s - eps + 0.5 * y(2) * y(2) + 1.0 - std::cos(y(3));
  return {v, Eigen::Vector4d(y(0) / s, 4.0 * y(1) / s, y(2), std::sin(y(3)))};
}

/// h(x, k) = b - V(q^{-1} x), gradients through the inverse SE(2) action.
inline BarrierValue rover_h(const Vec & x, const Vec & k, double eps)
{
  const Se2Element q = pose_of(k);
  const Vec y = q.inverse_act(x);
  const auto [v, gv] = lyapunov(y, eps);
  const double c = std::cos(q.psi);
  const double s = std::sin(q.psi);

  BarrierValue out;
  out.value = k(idx::b) - v;
  out.grad_x = Vec::Zero(4);
  // dy1/dx = (c, s), dy2/dx = (-s, c)
  out.grad_x(0) = -(gv(0) * c - gv(1) * s);
  out.grad_x(1) = -(gv(0) * s + gv(1) * c);
  out.grad_x(2) = -gv(2);
  out.grad_x(3) = -gv(3);

  out.grad_k = Vec::Zero(k.size());
  out.grad_k(idx::b) = 1.0;
  out.grad_k(idx::p1) = -out.grad_x(0);
  out.grad_k(idx::p2) = -out.grad_x(1);
  // dy1/dpsi = y2, dy2/dpsi = -y1, dy4/dpsi = -1
  out.grad_k(idx::psi) = -(gv(0) * y(1) - gv(1) * y(0) - gv(3));
  return out;
}

/**
 * Separating-hyperplane constraint for obstacle i:
 *   rho_i = n_i . (z_i - p) - R_i - R - support(ellipse, n_i),
 * with n_i = (cos eta_i, sin eta_i) and the C(k) ellipse of semiaxes r_b
 * (heading direction) and r_b / 2.
 */
inline ScalarParamValue rover_rho(const Obstacle & obs, int i, const Vec & k, double eps, double robot_radius)
{
  const int e = idx::eta0 + i;
  const double eta = k(e);
  const double b = k(idx::b);
  const Eigen::Vector2d n(std::cos(eta), std::sin(eta));
  const Eigen::Vector2d dn(-std::sin(eta), std::cos(eta));
  const Eigen::Vector2d rel = obs.center - Eigen::Vector2d(k(idx::p1), k(idx::p2));

  const double theta = eta - k(idx::psi);
  const double st = std::sin(theta);
  const double ct = std::cos(theta);
  const double shape = std::sqrt(ct * ct + 0.25 * st * st);
  const double dshape = -0.75 * st * ct / shape;
  const double rb = level_radius(b, eps);

  ScalarParamValue out;
  out.value = n.dot(rel) - obs.radius - robot_radius - rb * shape;
  out.grad_k = Vec::Zero(k.size());
  out.grad_k(idx::b) = -shape * (b + eps) / std::max(rb, 1e-12);
  out.grad_k(idx::p1) = -n(0);
  out.grad_k(idx::p2) = -n(1);
  out.grad_k(idx::psi) = rb * dshape;
  out.grad_k(e) = dn.dot(rel) - rb * dshape;
  return out;
}

/// Input that keeps V(q^{-1} x) constant; always inside [-1, 1]^2.
inline Vec rover_fallback_input(const Vec & x, const Vec & k, double eps)
{
  const Vec y = pose_of(k).inverse_act(x);
  const double s = std::sqrt(y(0) * y(0) + 4.0 * y(1) * y(1) + eps * eps);
  Vec u(2);
  u << (-y(0) * std::cos(y(3)) - 2.0 * y(1) * std::sin(y(3))) / s, -2.0 * y(1) / s;
  return u;
}

inline Dynamics rover_dynamics()
{
  Dynamics d;
  d.n = 4;
  d.m = 2;
  d.f = [](const Vec & x) {
    Vec out(4);
    out << x(2) * std::cos(x(3)), x(2) * std::sin(x(3)), 0.0, 0.0;
    return out;
  };
  d.g = [](const Vec & x) {
    Mat g = Mat::Zero(4, 2);
    g(2, 0) = 1.0;
    g(3, 1) = x(2);
    return g;
  };
  d.jac_f = [](const Vec & x) {
    Mat j = Mat::Zero(4, 4);
    j(0, 2) = std::cos(x(3));
    j(0, 3) = -x(2) * std::sin(x(3));
    j(1, 2) = std::sin(x(3));
    j(1, 3) = x(2) * std::cos(x(3));
    return j;
  };
  d.jac_g = [](const Vec &) {
    std::vector<Mat> j(4, Mat::Zero(4, 2));
    j[2](3, 1) = 1.0;
    return j;
  };
  return d;
}

/**
 * Random obstacle field: radii uniform in [radius_min, radius_max], centers
 * uniform in the square of half-width field_half_width around the origin.
 * Obstacles that come within start_margin of the initial invariant set (a disk
 * of radius r_b(b0) around the start position) are rejected.
 */
inline std::vector<Obstacle> sample_obstacles(std::uint64_t seed, const Constants & c = {}, const Vec & start = Vec::Zero(4))
{
  Rng rng(seed);
  std::vector<Obstacle> out;
  const double rb0 = level_radius(c.b0, c.eps);
  int rejections = 0;
  while (static_cast<int>(out.size()) < c.n_obstacles) {
    Obstacle o;
    o.radius = rng.uniform(c.radius_min, c.radius_max);
    o.center.x() = rng.uniform(-c.field_half_width, c.field_half_width);
    o.center.y() = rng.uniform(-c.field_half_width, c.field_half_width);
    const double dist = (o.center - start.head<2>()).norm();
    if (dist - o.radius - c.robot_radius - rb0 < c.start_margin) {
      if (++rejections >= 10000) { throw SamplingFailed("obstacle sampling exceeded 10^4 rejections"); }
      continue;
    }
    out.push_back(o);
  }
  return out;
}

/// The rover case study: obstacles, barrier, constraints and bookkeeping.
class RoverScenario
{
public:
  explicit RoverScenario(std::vector<Obstacle> obstacles, Constants c = {}, Vec x0 = Vec::Zero(4))
      : obstacles_(std::move(obstacles)), c_(c), x0_(std::move(x0)), dyn_(rover_dynamics())
  {
    k0_ = compute_initial_parameter();
  }

  const Dynamics & dynamics() const { return dyn_; }
  const Constants & constants() const { return c_; }
  const std::vector<Obstacle> & obstacles() const { return obstacles_; }
  int n_k() const { return idx::eta0 + static_cast<int>(obstacles_.size()); }

  Vec initial_state() const { return x0_; }
  Vec initial_parameter() const { return k0_; }

  InputPolytope input() const { return InputPolytope::box(-Vec::Ones(2), Vec::Ones(2)); }

  Pcbf pcbf() const
  {
    const double eps = c_.eps;
    return Pcbf{n_k(), [eps](const Vec & x, const Vec & k) { return rover_h(x, k, eps); }, ClassK::linear(c_.alpha_slope)};
  }

  /// rho_0 = b, then one separating-hyperplane constraint per obstacle.
  ParamConstraintSet params() const
  {
    ParamConstraintSet set;
    const int nk = n_k();
    set.scalar.push_back({[nk](const Vec & k, double) {
                            ScalarParamValue v;
                            v.value = k(idx::b);
                            v.grad_k = Vec::Unit(nk, idx::b);
                            return v;
                          },
                          ClassK::linear(c_.beta_slope)});
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      set.scalar.push_back({[obs = obstacles_[i], i, c = c_](const Vec & k, double) {
                              return rover_rho(obs, static_cast<int>(i), k, c.eps, c.robot_radius);
                            },
                            ClassK::linear(c_.beta_slope)});
    }
    return set;
  }

  FilterConfig filter_config() const
  {
    FilterConfig cfg;
    cfg.mu = c_.mu;
    return cfg;
  }

  Vec phi_values(const Vec & x, const Vec & k) const
  {
    Vec out(1);
    out(0) = rover_h(x, k, c_.eps).value;
    return out;
  }

  Vec rho_values(const Vec & k, double) const
  {
    Vec out(1 + static_cast<Eigen::Index>(obstacles_.size()));
    out(0) = k(idx::b);
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      out(static_cast<Eigen::Index>(i) + 1) = rover_rho(obstacles_[i], static_cast<int>(i), k, c_.eps, c_.robot_radius).value;
    }
    return out;
  }

  /// min over obstacles of center distance - R_i - R.
  double clearance(const Vec & x, const Vec &, double) const
  {
    double best = std::numeric_limits<double>::infinity();
    for (const auto & o : obstacles_) {
      best = std::min(best, (x.head<2>() - o.center).norm() - o.radius - c_.robot_radius);
    }
    return best;
  }

private:
  /// q0 = start pose, eta0 = bearings to obstacles, b halved until every rho_i >= 0.
  Vec compute_initial_parameter() const
  {
    const Se2Element q0{x0_.head<2>(), x0_(3)};
    Vec eta(static_cast<Eigen::Index>(obstacles_.size()));
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      const Eigen::Vector2d d = obstacles_[i].center - x0_.head<2>();
      eta(static_cast<Eigen::Index>(i)) = std::atan2(d.y(), d.x());
    }
    double b = std::max(c_.b0, 0.5 * x0_(2) * x0_(2));
    for (int attempt = 0; attempt < 60; ++attempt) {
      const Vec k = make_parameter(b, q0, eta);
      const Vec rho = rho_values(k, 0.0);
      if (rho.minCoeff() >= 0.0 && rover_h(x0_, k, c_.eps).value >= 0.0) { return k; }
      b *= 0.5;
    }
    throw InitFailed("no feasible rover initial parameter");
  }

  std::vector<Obstacle> obstacles_;
  Constants c_;
  Vec x0_;
  Vec k0_;
  Dynamics dyn_;
};

inline double wrap_angle(double a)
{
  a = std::fmod(a + std::numbers::pi, 2.0 * std::numbers::pi);
  if (a < 0.0) { a += 2.0 * std::numbers::pi; }
  return a - std::numbers::pi;
}

/**
 * Scripted operator: full throttle and full-scale steering toward an obstacle
 * center. Every `retarget_period` seconds it switches to the nearest obstacle
 * other than the current target.
 */
class AggressiveDriver
{
public:
  explicit AggressiveDriver(std::vector<Obstacle> obstacles, double retarget_period = 5.0)
      : obstacles_(std::move(obstacles)), period_(retarget_period)
  {}

  Vec operator()(double t, const Vec & x)
  {
    const int epoch = static_cast<int>(std::floor(t / period_));
    if (epoch != epoch_ || target_ < 0) {
      epoch_ = epoch;
      retarget(x);
    }
    Vec u(2);
    u(0) = 1.0;
    u(1) = 0.0;
    if (target_ >= 0) {
      const Eigen::Vector2d d = obstacles_[static_cast<std::size_t>(target_)].center - x.head<2>();
      const double err = wrap_angle(std::atan2(d.y(), d.x()) - x(3));
      if (std::abs(err) > 1e-3) { u(1) = err > 0.0 ? 1.0 : -1.0; }
    }
    return u;
  }

  int target() const { return target_; }

private:
  void retarget(const Vec & x)
  {
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < obstacles_.size(); ++i) {
      if (static_cast<int>(i) == target_ && obstacles_.size() > 1) { continue; }
      const double d = (obstacles_[i].center - x.head<2>()).norm();
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(i);
      }
    }
    target_ = best;
  }

  std::vector<Obstacle> obstacles_;
  double period_;
  int epoch_ = -1;
  int target_ = -1;
};

/// PCBF-QP controller for the rover fed by an arbitrary reference policy.
class RoverController
{
public:
  using Reference = std::function<Vec(double, const Vec &)>;

  RoverController(const RoverScenario & sc, Reference reference)
      : filter_(sc.pcbf().as_hopcbf(), sc.dynamics(), sc.input(), sc.params(), sc.filter_config()),
        reference_(std::move(reference))
  {}

  ControlAction operator()(const Vec & x, const Vec & k, double t)
  {
    Vec u_ref = reference_(t, x).cwiseMax(-1.0).cwiseMin(1.0);
    last_ = filter_.step(x, k, t, u_ref);
    ControlAction a;
    a.u_ref = std::move(u_ref);
    a.u = last_.u;
    a.v = last_.v;
    a.qp_iterations = last_.qp.iterations;
    a.qp_status = last_.qp.status;
    return a;
  }

  const FilterOutput & last() const { return last_; }

private:
  SafetyFilter filter_;
  Reference reference_;
  FilterOutput last_;
};

}  // namespace pcbf::rover
