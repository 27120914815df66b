#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "pcbf/cbf_types.hpp"
#include "pcbf/filter.hpp"
#include "pcbf/log.hpp"
#include "pcbf/sim.hpp"

namespace pcbf::acc {

struct Constants
{
  double u_lower = -1.0;
  double u_upper = 1.0;
  double delta = 0.5;
  double eps = 0.1;
  double a = 2.0;
  double gamma = 2.0;
  double beta_slope = 2.0;
  double mu = 0.01;
  double gain = 1.0;
  double v_ref = 1.5;
  double k0 = 0.1;
  Vec x0 = Vec::Zero(2);

  /// a >= -2 / u_L makes u = u_L a valid witness for the order-2 row.
  bool valid() const { return u_lower < 0.0 && a >= -2.0 / u_lower; }
};

/// Front-vehicle position and its right time derivative.
inline std::pair<double, double> front_profile(int id, double t)
{
  switch (id) {
    case 1: return {1.0 + t, 1.0};
    case 2: return {1.0 + t + 0.5 * std::sin(2.0 * t), 1.0 + std::cos(2.0 * t)};
    case 3: return t < 5.0 ? std::pair{1.0 + t, 1.0} : std::pair{6.0, 0.0};
    default: throw InvalidArgument("front profile must be 1, 2 or 3");
  }
}

inline double uref(const Vec & x, const Constants & c = {})
{
  return std::clamp(c.gain * (c.v_ref - x(1)), c.u_lower, c.u_upper);
}

inline Dynamics dynamics()
{
  Dynamics d;
  d.n = 2;
  d.m = 1;
  d.f = [](const Vec & x) { return Vec{{x(1), 0.0}}; };
  d.g = [](const Vec &) { return Mat{{0.0}, {1.0}}; };
  d.jac_f = [](const Vec &) { return Mat{{0.0, 1.0}, {0.0, 0.0}}; };
  d.jac_g = [](const Vec &) { return std::vector<Mat>(2, Mat::Zero(2, 1)); };
  return d;
}

/// sqrt(a (k - x1) + eps^2), clamped at zero outside the first chain set.
inline double chain_root(const Vec & x, const Vec & k, const Constants & c)
{
  const double arg = c.a * (k(0) - x(0)) + c.eps * c.eps;
  if (arg < 0.0) {
    log().warn("acc: sqrt argument {:.3e} < 0, clamped", arg);
    return 0.0;
  }
  return std::sqrt(arg);
}

/// phi_0 = k - x1, phi_1 = -x2 + sqrt(a (k - x1) + eps^2) - eps.
inline Hopcbf hopcbf(const Constants & c = {})
{
  Hopcbf hop;
  hop.n_k = 1;
  hop.phi.push_back([](const Vec & x, const Vec & k) {
    return BarrierValue{k(0) - x(0), Vec{{-1.0, 0.0}}, Vec{{1.0}}};
  });
  hop.phi.push_back([c](const Vec & x, const Vec & k) {
    const double s = chain_root(x, k, c);
    const double ds = s > 0.0 ? c.a / (2.0 * s) : 0.0;
    return BarrierValue{-x(1) + s - c.eps, Vec{{-ds, -1.0}}, Vec{{ds}}};
  });
  const double a = c.a;
  const double eps = c.eps;
  hop.alphas.push_back({[a, eps](double y, const Vec &) { return std::sqrt(std::max(0.0, a * y + eps * eps)) - eps; },
                        [a, eps](double y, const Vec &) { return a / (2.0 * std::sqrt(std::max(1e-300, a * y + eps * eps))); }});
  hop.alphas.push_back(ClassK::linear(c.gamma));
  return hop;
}

/// rho = p_f(t) - k - delta.
inline ParamConstraintSet params(int profile, const Constants & c = {})
{
  ParamConstraintSet set;
  set.scalar.push_back({[profile, delta = c.delta](const Vec & k, double t) {
                          const auto [pf, dpf] = front_profile(profile, t);
                          return ScalarParamValue{pf - k(0) - delta, Vec{{-1.0}}, dpf};
                        },
                        ClassK::linear(c.beta_slope)});
  return set;
}

class AccScenario
{
public:
  explicit AccScenario(int profile, Constants c = {})
      : profile_(profile), c_(std::move(c)), dyn_(acc::dynamics()), hop_(acc::hopcbf(c_)), params_(acc::params(profile, c_))
  {
    front_profile(profile, 0.0);
  }

  const Dynamics & dynamics() const { return dyn_; }
  const Constants & constants() const { return c_; }
  int profile() const { return profile_; }
  const Hopcbf & hopcbf() const { return hop_; }
  const ParamConstraintSet & params() const { return params_; }
  InputPolytope input() const { return InputPolytope::box(Vec::Constant(1, c_.u_lower), Vec::Constant(1, c_.u_upper)); }

  FilterConfig filter_config() const
  {
    FilterConfig cfg;
    cfg.mu = c_.mu;
    return cfg;
  }

  Vec initial_state() const { return c_.x0; }
  Vec initial_parameter() const { return Vec::Constant(1, c_.k0); }

  Vec phi_values(const Vec & x, const Vec & k) const
  {
    Vec out(2);
    out << hop_.phi[0](x, k).value, hop_.phi[1](x, k).value;
    return out;
  }

  Vec rho_values(const Vec & k, double t) const { return Vec::Constant(1, params_.scalar[0].eval(k, t).value); }

  /// Gap to the front vehicle, p_f - x1.
  double clearance(const Vec & x, const Vec &, double t) const { return front_profile(profile_, t).first - x(0); }

private:
  int profile_;
  Constants c_;
  Dynamics dyn_;
  Hopcbf hop_;
  ParamConstraintSet params_;
};

class AccController
{
public:
  explicit AccController(const AccScenario & sc)
      : filter_(sc.hopcbf(), sc.dynamics(), sc.input(), sc.params(), sc.filter_config()), c_(sc.constants())
  {}

  ControlAction operator()(const Vec & x, const Vec & k, double t)
  {
    const Vec u_ref = Vec::Constant(1, uref(x, c_));
    const FilterOutput out = filter_.step(x, k, t, u_ref);
    ControlAction a;
    a.u_ref = u_ref;
    a.u = out.u;
    a.v = out.v;
    a.qp_iterations = out.qp.iterations;
    a.qp_status = out.qp.status;
    return a;
  }

private:
  SafetyFilter filter_;
  Constants c_;
};

}  // namespace pcbf::acc
