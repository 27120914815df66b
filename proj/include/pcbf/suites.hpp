#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "pcbf/filter.hpp"
#include "pcbf/oracles.hpp"
#include "pcbf/random.hpp"
#include "pcbf/scenarios/acc.hpp"
#include "pcbf/scenarios/linear.hpp"
#include "pcbf/scenarios/rover.hpp"
#include "pcbf/scenarios/se2.hpp"
#include "pcbf/validation.hpp"

namespace pcbf::suites {

struct Check
{
  std::string name;
  double value = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string relation;  ///< "<=" or ">="
};

struct SuiteResult
{
  std::string suite;
  std::vector<Check> checks;
  double seconds = 0.0;

  bool pass() const
  {
    for (const auto & c : checks) {
      if (!c.pass) { return false; }
    }
    return !checks.empty();
  }

  void at_most(const std::string & name, double value, double threshold)
  {
    checks.push_back({name, value, threshold, value <= threshold, "<="});
  }

  void at_least(const std::string & name, double value, double threshold)
  {
    checks.push_back({name, value, threshold, value >= threshold, ">="});
  }
};

enum class Sabotage { None, Gradient };

struct Options
{
  std::uint64_t seed = 1;
  Sabotage sabotage = Sabotage::None;
};

// ---------------------------------------------------------------------------
// Samplers

inline constexpr double pi = std::numbers::pi;

inline Vec rover_random_state(Rng & rng)
{
  return Vec{{rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0), rng.uniform(-2.0, 2.0), rng.uniform(-pi, pi)}};
}

inline Vec rover_random_parameter(Rng & rng, int n_obstacles)
{
  Vec eta(n_obstacles);
  for (int i = 0; i < n_obstacles; ++i) { eta(i) = rng.uniform(-pi, pi); }
  const Se2Element q{{rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0)}, rng.uniform(-pi, pi)};
  return rover::make_parameter(rng.uniform(0.05, 3.0), q, eta);
}

/// k with every rover_rho >= 0: bearings to the obstacles plus noise, rejection sampled.
inline Vec rover_feasible_parameter(Rng & rng, const std::vector<rover::Obstacle> & obs, const rover::Constants & c)
{
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const Eigen::Vector2d p(rng.uniform(-8.0, 8.0), rng.uniform(-8.0, 8.0));
    if (oracle::geometric_clearance(p, obs, c.robot_radius) < 0.05) { continue; }
    Vec eta(static_cast<Eigen::Index>(obs.size()));
    for (std::size_t i = 0; i < obs.size(); ++i) {
      const Eigen::Vector2d d = obs[i].center - p;
      eta(static_cast<Eigen::Index>(i)) = std::atan2(d.y(), d.x()) + rng.uniform(-0.2, 0.2);
    }
    const Vec k = rover::make_parameter(rng.uniform(0.0, 1.5), {p, rng.uniform(-pi, pi)}, eta);
    bool ok = true;
    for (std::size_t i = 0; i < obs.size() && ok; ++i) {
      ok = rover::rover_rho(obs[i], static_cast<int>(i), k, c.eps, c.robot_radius).value >= 0.0;
    }
    if (ok) { return k; }
  }
  throw SamplingFailed("no feasible rover parameter found");
}

/// x with rover_h(x, k) >= 0, sampled in the body frame of q.
inline Vec rover_state_in_level_set(Rng & rng, const Vec & k, double eps)
{
  const double b = k(rover::idx::b);
  const double rb = rover::level_radius(b, eps);
  const double vmax = std::sqrt(2.0 * b);
  const Se2Element q = rover::pose_of(k);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const Vec y{{rng.uniform(-rb, rb), rng.uniform(-0.5 * rb, 0.5 * rb), rng.uniform(-vmax, vmax), rng.uniform(-pi, pi)}};
    if (rover::lyapunov(y, eps).first <= b) { return q.act(y); }
  }
  throw SamplingFailed("no state found in the level set");
}

/// (x, k) with k >= x1, i.e. inside the domain of phi_1.
inline std::pair<Vec, Vec> acc_domain_point(Rng & rng)
{
  const double x1 = rng.uniform(-5.0, 5.0);
  return {Vec{{x1, rng.uniform(-3.0, 3.0)}}, Vec::Constant(1, x1 + rng.uniform(0.0, 5.0))};
}

/// (x, k) with phi_0, phi_1 >= 0.
inline std::pair<Vec, Vec> acc_safe_point(Rng & rng, const acc::Constants & c)
{
  const double x1 = rng.uniform(-5.0, 5.0);
  const double k = x1 + rng.uniform(0.0, 5.0);
  const double s = std::sqrt(c.a * (k - x1) + c.eps * c.eps);
  return {Vec{{x1, rng.uniform(-3.0, s - c.eps)}}, Vec::Constant(1, k)};
}

// ---------------------------------------------------------------------------
// Suites

inline SuiteResult qp_suite(const Options & opt, int count = 500)
{
  SuiteResult res{"qp", {}};
  Rng rng(opt.seed);
  double max_dev = 0.0, max_kkt = 0.0;
  int status_mismatch = 0, bad_certificates = 0, infeasible = 0;
  for (int i = 0; i < count; ++i) {
    const QuadraticProgram qp = oracle::random_qp(rng);
    const QpSolution sol = solve_qp(qp);
    const auto ref = oracle::brute_force_qp(qp);
    if (!ref) {
      ++infeasible;
      if (sol.status != QpStatus::Infeasible) {
        ++status_mismatch;
        continue;
      }
      const Vec & y = sol.farkas;
      const bool cert = y.size() == qp.rows() && y.minCoeff() >= -1e-12 && (qp.A.transpose() * y).cwiseAbs().maxCoeff() <= 1e-8 &&
                        qp.b.dot(y) < 0.0;
      if (!cert) { ++bad_certificates; }
      continue;
    }
    if (sol.status != QpStatus::Optimal) {
      ++status_mismatch;
      continue;
    }
    max_dev = std::max(max_dev, (sol.z - *ref).cwiseAbs().maxCoeff());
    const auto kkt = kkt_residuals(qp, sol);
    max_kkt = std::max({max_kkt, kkt.stationarity, kkt.primal, kkt.complementarity, kkt.dual});
  }
  res.at_most("solution deviation from enumeration", max_dev, 1e-6);
  res.at_most("KKT residual", max_kkt, 1e-8);
  res.at_most("status mismatches", status_mismatch, 0);
  res.at_most("invalid infeasibility certificates (of " + std::to_string(infeasible) + ")", bad_certificates, 0);
  return res;
}

inline SuiteResult gradient_suite(const Options & opt)
{
  SuiteResult res{"gradients", {}};
  Rng rng(opt.seed + 1);
  const rover::Constants rc;
  const auto obs = rover::sample_obstacles(0, rc);

  double e_h = 0.0, e_rho = 0.0, e_dyn = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec x = rover_random_state(rng);
    const Vec k = rover_random_parameter(rng, static_cast<int>(obs.size()));
    e_h = std::max(e_h, barrier_gradient_error([&](const Vec & xx, const Vec & kk) { return rover::rover_h(xx, kk, rc.eps); }, x, k));
    for (std::size_t j = 0; j < obs.size(); ++j) {
      auto fn = [&](const Vec & kk) { return rover::rover_rho(obs[j], static_cast<int>(j), kk, rc.eps, rc.robot_radius).value; };
      e_rho = std::max(e_rho, gradient_check(fn, rover::rover_rho(obs[j], static_cast<int>(j), k, rc.eps, rc.robot_radius).grad_k, k));
    }
    e_dyn = std::max(e_dyn, dynamics_jacobian_error(rover::rover_dynamics(), x));
  }
  res.at_most("rover h gradient", e_h, 1e-5);
  res.at_most("rover rho gradient", e_rho, 1e-5);
  res.at_most("rover dynamics jacobian", e_dyn, 1e-5);

  const acc::Constants ac;
  Hopcbf hop = acc::hopcbf(ac);
  if (opt.sabotage == Sabotage::Gradient) {
    const BarrierFn good = hop.phi[1];
    hop.phi[1] = [good](const Vec & x, const Vec & k) {
      BarrierValue v = good(x, k);
      v.grad_k = -v.grad_k;
      return v;
    };
  }
  double e_phi0 = 0.0, e_phi1 = 0.0;
  for (int i = 0; i < 100; ++i) {
    auto [x, k] = acc_domain_point(rng);
    k(0) += 0.05;  // keep the central difference inside the square-root domain
    e_phi0 = std::max(e_phi0, barrier_gradient_error(hop.phi[0], x, k));
    e_phi1 = std::max(e_phi1, barrier_gradient_error(hop.phi[1], x, k));
  }
  res.at_most("acc phi_0 gradient", e_phi0, 1e-5);
  res.at_most("acc phi_1 gradient", e_phi1, 1e-5);

  const linear::Constants lc;
  const auto lp = linear::params(lc);
  const int n = 3;
  double e_lh = 0.0, e_drho = 0.0, lin_defect = 0.0;
  for (int i = 0; i < 100; ++i) {
    Vec x(3), k(linear::n_k_for(n)), v(linear::n_k_for(n)), w(linear::n_k_for(n));
    for (int j = 0; j < 3; ++j) { x(j) = rng.normal(); }
    for (Eigen::Index j = 0; j < k.size(); ++j) {
      k(j) = rng.normal();
      v(j) = rng.normal();
      w(j) = rng.normal();
    }
    e_lh = std::max(e_lh, barrier_gradient_error([n](const Vec & xx, const Vec & kk) { return linear::h_value(xx, kk, n); }, x, k));
    const double step = 1e-6;
    for (const auto & c : lp.matrix) {
      const Mat fd = (c.rho(k + step * v) - c.rho(k - step * v)) / (2.0 * step);
      const Mat an = c.dir_deriv(k, v);
      e_drho = std::max(e_drho, (fd - an).cwiseAbs().maxCoeff() / (1.0 + an.cwiseAbs().maxCoeff()));
      lin_defect = std::max(lin_defect, linearity_defect(c, k, v, w, rng.uniform(-2.0, 2.0)));
    }
  }
  res.at_most("linear h gradient", e_lh, 1e-5);
  res.at_most("linear D rho against finite differences", e_drho, 1e-6);
  res.at_most("linear D rho linearity", lin_defect, 1e-10);
  return res;
}

inline SuiteResult chain_suite(const Options & opt)
{
  SuiteResult res{"chain", {}};
  Rng rng(opt.seed + 2);
  const acc::Constants c;
  const Hopcbf hop = acc::hopcbf(c);
  const Dynamics dyn = acc::dynamics();
  double chain = 0.0, degree = 0.0;
  std::vector<Vec> ks;
  for (int i = 0; i < 200; ++i) {
    const auto [x, k] = acc_domain_point(rng);
    chain = std::max(chain, chain_residual(hop, dyn, x, k).cwiseAbs().maxCoeff());
    degree = std::max(degree, relative_degree_defect(hop, dyn, x, k).cwiseAbs().maxCoeff());
    ks.push_back(k);
  }
  res.at_most("acc chain residual", chain, 1e-8);
  res.at_most("acc relative-degree defect", degree, 1e-10);
  bool class_k = true;
  for (const auto & a : hop.alphas) { class_k = class_k && check_class_k(a, ks); }
  res.at_least("acc class-K shape", class_k ? 1.0 : 0.0, 1.0);
  return res;
}

inline SuiteResult symmetry_suite(const Options & opt)
{
  SuiteResult res{"symmetry", {}};
  Rng rng(opt.seed + 3);
  const double eps = rover::Constants{}.eps;
  double identity = 0.0, roundtrip = 0.0;
  int membership_mismatch = 0;
  for (int i = 0; i < 200; ++i) {
    const Vec x = rover_random_state(rng);
    const Vec khat = rover_random_parameter(rng, 3);
    const Se2Element q{{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)}, rng.uniform(-pi, pi)};
    const Se2Element q0 = rover::pose_of(khat);
    const Vec eta = khat.tail(3);
    const double b = khat(rover::idx::b);
    const double lhs = rover::rover_h(q.act(x), rover::make_parameter(b, q.compose(q0), eta), eps).value;
    const double rhs = rover::rover_h(x, rover::make_parameter(b, q0, eta), eps).value;
    identity = std::max(identity, std::abs(lhs - rhs));
    roundtrip = std::max(roundtrip, (q.inverse_act(q.act(x)) - x).cwiseAbs().maxCoeff());
    // Identity-pose copy C_e versus the transformed set C((q, k-hat)).
    const double he = rover::rover_h(x, rover::make_parameter(b, Se2Element::identity(), eta), eps).value;
    const double hq = rover::rover_h(q.act(x), rover::make_parameter(b, q, eta), eps).value;
    if (std::abs(he) > 1e-9 && (he >= 0.0) != (hq >= 0.0)) { ++membership_mismatch; }
  }
  res.at_most("h(q x, q k) - h(x, k)", identity, 1e-10);
  res.at_most("q^-1 q x - x", roundtrip, 1e-12);
  res.at_most("membership mismatches", membership_mismatch, 0);
  return res;
}

inline SuiteResult separation_suite(const Options & opt)
{
  SuiteResult res{"separation", {}};
  Rng rng(opt.seed + 4);
  const rover::Constants c;
  const auto obs = rover::sample_obstacles(opt.seed, c);
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 200; ++i) {
    const Vec k = rover_feasible_parameter(rng, obs, c);
    for (int j = 0; j < 200; ++j) {
      const Vec x = rover_state_in_level_set(rng, k, c.eps);
      worst = std::min(worst, oracle::geometric_clearance(x.head<2>(), obs, c.robot_radius));
    }
  }
  res.at_least("min clearance over C(k) with rho >= 0", worst, -1e-9);
  return res;
}

inline SuiteResult acc_validity_suite(const Options & opt)
{
  SuiteResult res{"acc_validity", {}};
  Rng rng(opt.seed + 5);
  const acc::Constants c;
  const Hopcbf hop = acc::hopcbf(c);
  const Dynamics dyn = acc::dynamics();
  const ParamConstraintSet none;
  double worst = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 500; ++i) {
    const auto [x, k] = acc_safe_point(rng, c);
    const AssembledRows rows = assemble_rows(hop, dyn, none, x, k, 0.0);
    const Vec u = Vec::Constant(1, c.u_lower);
    for (const auto & row : rows.rows) { worst = std::min(worst, row.eval(u, Vec::Zero(1))); }
  }
  res.at_least("min row value at u = u_L, v = 0", worst, 0.0);
  res.at_least("a >= -2 / u_L", c.valid() ? 1.0 : 0.0, 1.0);
  return res;
}

/// (u_fb, v = 0) satisfies every assembled row on sampled safe points.
inline SuiteResult fallback_suite(const Options & opt)
{
  SuiteResult res{"fallback", {}};
  Rng rng(opt.seed + 6);
  const rover::Constants c;
  const auto obs = rover::sample_obstacles(opt.seed, c);
  const rover::RoverScenario sc(obs, c);
  const Hopcbf hop = sc.pcbf().as_hopcbf();
  const ParamConstraintSet params = sc.params();
  double vdot = -std::numeric_limits<double>::infinity(), box = 0.0, row_min = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 1000; ++i) {
    const Vec k = rover_random_parameter(rng, static_cast<int>(obs.size()));
    const Vec x = rover_random_state(rng);
    const Vec u = rover::rover_fallback_input(x, k, c.eps);
    const auto h = rover::rover_h(x, k, c.eps);
    vdot = std::max(vdot, -h.grad_x.dot(sc.dynamics().flow(x, u)));
    box = std::max(box, u.cwiseAbs().maxCoeff());
  }
  for (int i = 0; i < 1000; ++i) {
    const Vec k = rover_feasible_parameter(rng, obs, c);
    const Vec x = rover_state_in_level_set(rng, k, c.eps);
    const Vec u = rover::rover_fallback_input(x, k, c.eps);
    const AssembledRows rows = assemble_rows(hop, sc.dynamics(), params, x, k, 0.0);
    for (const auto & row : rows.rows) { row_min = std::min(row_min, row.eval(u, Vec::Zero(k.size()))); }
  }
  res.at_most("rover V-dot under fallback", vdot, 1e-10);
  res.at_most("rover fallback |u|", box, 1.0);
  res.at_least("rover rows at (u_fb, 0)", row_min, -1e-10);
  return res;
}

/**
 * Filter reductions against independently assembled programs:
 * n_k = 0 reproduces HOCBF-QP and r = 1 reproduces PCBF-QP.
 */
inline SuiteResult reduction_suite(const Options & opt, int count = 100)
{
  SuiteResult res{"reduction", {}};
  Rng rng(opt.seed + 7);
  FilterConfig cfg;
  const InputPolytope box1 = InputPolytope::box(-Vec::Ones(1), Vec::Ones(1));
  const InputPolytope box2 = InputPolytope::box(-Vec::Ones(2), Vec::Ones(2));

  // n_k = 0, r = 2: the ACC chain with the parameter frozen; closed-form scalar solution.
  const acc::Constants ac;
  const Dynamics adyn = acc::dynamics();
  double dev_hocbf = 0.0;
  for (int i = 0; i < count / 2; ++i) {
    const auto [x, kf] = acc_safe_point(rng, ac);
    const Hopcbf full = acc::hopcbf(ac);
    Hopcbf frozen;
    for (const auto & phi : full.phi) {
      frozen.phi.push_back([phi, kf](const Vec & xx, const Vec &) {
        BarrierValue v = phi(xx, kf);
        v.grad_k = Vec();
        return v;
      });
    }
    for (const auto & a : full.alphas) {
      ClassK fa{[a, kf](double y, const Vec &) { return a(y, kf); }, nullptr};
      if (a.derivative) { fa.derivative = [a, kf](double y, const Vec &) { return a.derivative(y, kf); }; }
      frozen.alphas.push_back(fa);
    }
    const double u_ref = rng.uniform(-2.0, 2.0);
    const FilterOutput out = filter_step(frozen, adyn, box1, {}, cfg, x, Vec(), 0.0, Vec::Constant(1, u_ref));
    // Order-2 row: -u + (-a x2 / (2 s) + gamma phi_1) >= 0.
    const double s = std::sqrt(ac.a * (kf(0) - x(0)) + ac.eps * ac.eps);
    const double phi1 = -x(1) + s - ac.eps;
    const double cap = -ac.a * x(1) / (2.0 * s) + ac.gamma * phi1;
    const double expected = std::max(-1.0, std::min({u_ref, cap, 1.0}));
    dev_hocbf = std::max(dev_hocbf, std::abs(out.u(0) - expected));
  }

  // n_k = 0, r = 1: rover with a frozen parameter against enumeration of the 5-row program.
  const rover::Constants rc;
  const auto obs = rover::sample_obstacles(opt.seed, rc);
  const rover::RoverScenario sc(obs, rc);
  double dev_cbf = 0.0;
  for (int i = 0; i < count / 2; ++i) {
    const Vec kf = rover_feasible_parameter(rng, obs, rc);
    const Vec x = rover_state_in_level_set(rng, kf, rc.eps);
    Hopcbf frozen;
    frozen.phi.push_back([kf, eps = rc.eps](const Vec & xx, const Vec &) {
      BarrierValue v = rover::rover_h(xx, kf, eps);
      v.grad_k = Vec();
      return v;
    });
    frozen.alphas.push_back(ClassK::linear(rc.alpha_slope));
    const Vec u_ref{{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)}};
    const FilterOutput out = filter_step(frozen, sc.dynamics(), box2, {}, cfg, x, Vec(), 0.0, u_ref);

    const auto h = rover::rover_h(x, kf, rc.eps);
    const Vec lgh = sc.dynamics().g(x).transpose() * h.grad_x;
    QuadraticProgram qp;
    qp.H = 2.0 * Mat::Identity(2, 2);
    qp.f = -2.0 * u_ref;
    qp.A = Mat(5, 2);
    qp.b = Vec(5);
    qp.A.row(0) = -lgh.transpose();
    qp.b(0) = h.grad_x.dot(sc.dynamics().f(x)) + rc.alpha_slope * h.value;
    qp.A.bottomRows(4) = box2.A;
    qp.b.tail(4) = box2.b;
    const auto ref = oracle::brute_force_qp(qp);
    dev_cbf = ref ? std::max(dev_cbf, (out.u - *ref).cwiseAbs().maxCoeff()) : std::numeric_limits<double>::infinity();
  }

  // r = 1 with parameters: rover PCBF-QP against a directly written program in (u, v).
  const Hopcbf hop = sc.pcbf().as_hopcbf();
  const ParamConstraintSet params = sc.params();
  double dev_pcbf = 0.0;
  for (int i = 0; i < count; ++i) {
    const Vec k = rover_feasible_parameter(rng, obs, rc);
    const Vec x = rover_state_in_level_set(rng, k, rc.eps);
    const Vec u_ref{{rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0)}};
    const FilterOutput out = filter_step(hop, sc.dynamics(), box2, params, cfg, x, k, 0.0, u_ref);

    const auto nk = k.size();
    const Eigen::Index d = 2 + nk;
    QuadraticProgram qp;
    qp.H = Mat::Zero(d, d);
    qp.H.topLeftCorner(2, 2) = 2.0 * Mat::Identity(2, 2);
    qp.H.bottomRightCorner(nk, nk) = 2.0 * cfg.mu * Mat::Identity(nk, nk);
    qp.f = Vec::Zero(d);
    qp.f.head(2) = -2.0 * u_ref;
    const auto nrho = static_cast<Eigen::Index>(params.scalar.size());
    qp.A = Mat::Zero(1 + nrho + 4, d);
    qp.b = Vec::Zero(1 + nrho + 4);
    const auto h = rover::rover_h(x, k, rc.eps);
    qp.A.block(0, 0, 1, 2) = -(sc.dynamics().g(x).transpose() * h.grad_x).transpose();
    qp.A.block(0, 2, 1, nk) = -h.grad_k.transpose();
    qp.b(0) = h.grad_x.dot(sc.dynamics().f(x)) + rc.alpha_slope * h.value;
    qp.A.block(1, 2, 1, nk) = -Vec::Unit(nk, rover::idx::b).transpose();
    qp.b(1) = rc.beta_slope * k(rover::idx::b);
    for (std::size_t j = 0; j < obs.size(); ++j) {
      const auto rho = rover::rover_rho(obs[j], static_cast<int>(j), k, rc.eps, rc.robot_radius);
      qp.A.block(2 + static_cast<Eigen::Index>(j), 2, 1, nk) = -rho.grad_k.transpose();
      qp.b(2 + static_cast<Eigen::Index>(j)) = rc.beta_slope * rho.value;
    }
    qp.A.block(1 + nrho, 0, 4, 2) = box2.A;
    qp.b.tail(4) = box2.b;
    const QpSolution ref = solve_qp(qp);
    if (ref.status != QpStatus::Optimal) {
      dev_pcbf = std::numeric_limits<double>::infinity();
      continue;
    }
    dev_pcbf = std::max({dev_pcbf, (out.u - ref.z.head(2)).cwiseAbs().maxCoeff(), (out.v - ref.z.tail(nk)).cwiseAbs().maxCoeff()});
  }

  res.at_most("n_k = 0 vs HOCBF-QP (acc, closed form)", dev_hocbf, 1e-10);
  res.at_most("n_k = 0 vs CBF-QP (rover, enumeration)", dev_cbf, 1e-10);
  res.at_most("r = 1 vs PCBF-QP (rover, direct program)", dev_pcbf, 1e-10);
  return res;
}

using SuiteFn = std::function<SuiteResult(const Options &)>;

inline const std::vector<std::pair<std::string, SuiteFn>> & registry()
{
  static const std::vector<std::pair<std::string, SuiteFn>> suites{
    {"qp", [](const Options & o) { return qp_suite(o); }},
    {"gradients", gradient_suite},
    {"chain", chain_suite},
    {"symmetry", symmetry_suite},
    {"separation", separation_suite},
    {"acc_validity", acc_validity_suite},
    {"fallback", fallback_suite},
    {"reduction", [](const Options & o) { return reduction_suite(o); }},
  };
  return suites;
}

/// Runs the named suites (all when `names` is empty); throws InvalidArgument on an unknown name.
inline std::vector<SuiteResult> run(const std::vector<std::string> & names, const Options & opt)
{
  for (const auto & n : names) {
    bool known = false;
    for (const auto & [name, fn] : registry()) { known = known || name == n; }
    if (!known) { throw InvalidArgument("unknown suite '" + n + "'"); }
  }
  std::vector<SuiteResult> out;
  for (const auto & [name, fn] : registry()) {
    if (!names.empty() && std::find(names.begin(), names.end(), name) == names.end()) { continue; }
    const auto t0 = std::chrono::steady_clock::now();
    SuiteResult r = fn(opt);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace pcbf::suites
