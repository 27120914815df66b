#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>

#include <unsupported/Eigen/MatrixFunctions>

#include "pcbf/scenarios/runner.hpp"
#include "pcbf/sim.hpp"
#include "pcbf/validation.hpp"

using namespace pcbf;

namespace {

Dynamics linear_dynamics(const Mat & A, const Mat & B)
{
  Dynamics d;
  d.n = static_cast<int>(A.rows());
  d.m = static_cast<int>(B.cols());
  d.f = [A](const Vec & x) { return Vec(A * x); };
  d.g = [B](const Vec &) { return B; };
  d.jac_f = [A](const Vec &) { return A; };
  d.jac_g = [n = A.rows(), B](const Vec &) { return std::vector<Mat>(static_cast<std::size_t>(n), Mat::Zero(n, B.cols())); };
  return d;
}

struct Still
{
  Dynamics dyn = linear_dynamics(Mat::Zero(2, 2), Mat::Identity(2, 1));
  const Dynamics & dynamics() const { return dyn; }
  Vec initial_state() const { return Vec{{0.3, 0.7}}; }
  Vec initial_parameter() const { return Vec(); }
  Vec phi_values(const Vec &, const Vec &) const { return Vec::Constant(1, 0.25); }
  Vec rho_values(const Vec &, double) const { return Vec(); }
  double clearance(const Vec &, const Vec &, double) const { return 1.0; }
};

struct Zero
{
  ControlAction operator()(const Vec &, const Vec &, double)
  {
    ControlAction a;
    a.u = a.u_ref = Vec::Zero(1);
    return a;
  }
};

ScenarioConfig acc_config(int profile, std::optional<double> dt = std::nullopt)
{
  ScenarioConfig c;
  c.scenario = "acc";
  c.profile = profile;
  c.dt_ctrl = dt;
  return c;
}

}  // namespace

TEST(Rk4, ZeroFlow)
{
  const auto dyn = linear_dynamics(Mat::Zero(2, 2), Mat::Zero(2, 1));
  const Vec x{{1.5, -2.0}};
  EXPECT_EQ(rk4_step(dyn, x, Vec::Zero(1), 0.3), x);
}

TEST(Rk4, ConstantFlow)
{
  const auto dyn = linear_dynamics(Mat::Zero(1, 1), Mat::Identity(1, 1));
  EXPECT_DOUBLE_EQ(rk4_step(dyn, Vec{{2.0}}, Vec{{1.0}}, 0.1)(0), 2.1);
}

TEST(Rk4, DoubleIntegrator)
{
  const auto dyn = linear_dynamics(Mat{{0.0, 1.0}, {0.0, 0.0}}, Mat{{0.0}, {1.0}});
  const Vec x = rk4_step(dyn, Vec::Zero(2), Vec{{1.0}}, 0.5);
  EXPECT_DOUBLE_EQ(x(0), 0.125);
  EXPECT_DOUBLE_EQ(x(1), 0.5);
}

TEST(Rk4, LinearSystemAgainstMatrixExponential)
{
  const linear::Constants c;
  Mat A = c.A;
  A(2, 0) = -1.0;
  A(2, 1) = -2.0;
  A(2, 2) = -1.5;
  const Mat B = c.B;
  const auto dyn = linear_dynamics(A, B);
  const double dt = 0.01;
  // exact zero-order-hold step from the augmented exponential
  Mat aug = Mat::Zero(4, 4);
  aug.topLeftCorner(3, 3) = A * dt;
  aug.topRightCorner(3, 1) = B * dt;
  const Mat e = aug.exp();
  Vec x = c.x0;
  Vec ref = c.x0;
  const Vec u{{0.4}};
  for (int i = 0; i < 100; ++i) {
    x = rk4_step(dyn, x, u, dt);
    ref = e.topLeftCorner(3, 3) * ref + e.topRightCorner(3, 1) * u;
  }
  EXPECT_LT((x - ref).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Run, ZeroDynamicsStaysPut)
{
  Still sc;
  Zero ctl;
  SimConfig cfg;
  cfg.t_final = 1.0;
  const auto trace = run(sc, ctl, cfg);
  ASSERT_EQ(trace.size(), 101u);
  for (const auto & r : trace) { EXPECT_EQ(r.x, sc.initial_state()); }
  EXPECT_DOUBLE_EQ(trace.back().t, 1.0);
}

TEST(TraceStats, EmptyTrace)
{
  EXPECT_THROW(trace_stats({}), EmptyTrace);
}

TEST(TraceStats, ConstantTrace)
{
  Still sc;
  Zero ctl;
  SimConfig cfg;
  cfg.t_final = 0.5;
  const auto st = trace_stats(run(sc, ctl, cfg));
  EXPECT_EQ(st.min_phi, 0.25);
  EXPECT_EQ(st.min_clearance, 1.0);
  EXPECT_EQ(st.max_abs_u, 0.0);
}

TEST(Csv, RoundTrip)
{
  const auto out = run_acc(acc_config(2));
  std::stringstream ss;
  write_csv(ss, out.trace);
  const auto tr = read_csv(ss);
  ASSERT_EQ(tr.rows.size(), out.trace.size());
  const int c = tr.column("x0");
  ASSERT_GE(c, 0);
  for (std::size_t i = 0; i < tr.rows.size(); ++i) { ASSERT_EQ(tr.rows[i][static_cast<std::size_t>(c)], out.trace[i].x(0)); }
}

TEST(Csv, MalformedInput)
{
  std::stringstream ss("t,x0\n0.0,abc\n");
  EXPECT_THROW(read_csv(ss), MalformedTrace);
}

TEST(Determinism, IdenticalConfigsGiveIdenticalTraces)
{
  ScenarioConfig c;
  c.scenario = "rover";
  c.t_final = 1.0;
  const auto a = run_scenario(c);
  const auto b = run_scenario(c);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    ASSERT_EQ(a.trace[i].x, b.trace[i].x);
    ASSERT_EQ(a.trace[i].k, b.trace[i].k);
    ASSERT_EQ(a.trace[i].u, b.trace[i].u);
  }
}

// ---------------------------------------------------------------------------
// ACC

TEST(Acc, FrontProfiles)
{
  EXPECT_EQ(acc::front_profile(1, 2.0), std::make_pair(3.0, 1.0));
  EXPECT_EQ(acc::front_profile(2, 0.0), std::make_pair(1.0, 2.0));
  EXPECT_EQ(acc::front_profile(3, 7.0), std::make_pair(6.0, 0.0));
  EXPECT_THROW(acc::front_profile(4, 0.0), InvalidArgument);
}

TEST(Acc, ReferenceInput)
{
  EXPECT_DOUBLE_EQ(acc::uref(Vec{{0.0, 1.5}}), 0.0);
  EXPECT_DOUBLE_EQ(acc::uref(Vec{{0.0, 0.0}}), 1.0);
  EXPECT_DOUBLE_EQ(acc::uref(Vec{{0.0, 3.0}}), -1.0);
}

TEST(Acc, BarrierValues)
{
  const auto hop = acc::hopcbf();
  const Vec x = Vec::Zero(2);
  const Vec k{{0.1}};
  EXPECT_DOUBLE_EQ(hop.phi[0](x, k).value, 0.1);
  EXPECT_NEAR(hop.phi[1](x, k).value, std::sqrt(0.21) - 0.1, 1e-15);
  EXPECT_NEAR(hop.phi[1](Vec{{0.1, 0.0}}, k).value, 0.0, 1e-15);
}

TEST(Acc, ChainHoldsOnRandomPoints)
{
  const auto hop = acc::hopcbf();
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    const Vec x{{rng.uniform(-5, 5), rng.uniform(-3, 3)}};
    const Vec k{{x(0) + rng.uniform(0.0, 5.0)}};
    EXPECT_LE(std::abs(chain_residual(hop, acc::dynamics(), x, k)(0)), 1e-10);
  }
}

TEST(Acc, ProfileOneKeepsGap)
{
  const auto out = run_acc(acc_config(1));
  EXPECT_FALSE(out.fault);
  EXPECT_GE(out.stats.min_clearance, 0.5 - 1e-4);
  EXPECT_GE(out.stats.min_phi, -1e-4);
  EXPECT_GE(out.stats.min_rho, -1e-4);
  EXPECT_LE(out.stats.max_abs_u, 1.0);
}

TEST(Acc, ProfileThreeStopsBehindFrontVehicle)
{
  const auto out = run_acc(acc_config(3));
  EXPECT_FALSE(out.fault);
  EXPECT_LE(out.trace.back().x(0), 6.0 - 0.5 + 1e-4);
  EXPECT_LT(std::abs(out.trace.back().x(1)), 1e-2);
}

TEST(Acc, HalvingTheControlPeriodBarelyMovesTheMinima)
{
  const auto a = run_acc(acc_config(1, 0.01));
  const auto b = run_acc(acc_config(1, 0.005));
  EXPECT_LT(std::abs(a.stats.min_phi - b.stats.min_phi), 1e-3);
  EXPECT_LT(std::abs(a.stats.min_rho - b.stats.min_rho), 1e-3);
}

TEST(Acc, HeldInputDipScalesWithThePeriod)
{
  // profile 2 rides the order-2 row for most of the run
  const auto a = run_acc(acc_config(2, 0.01));
  const auto b = run_acc(acc_config(2, 0.005));
  ASSERT_LT(a.stats.min_phi, 0.0);
  EXPECT_NEAR(a.stats.min_phi / b.stats.min_phi, 2.0, 0.05);
  EXPECT_GE(run_acc(acc_config(2)).stats.min_phi, -1e-4);
}

// ---------------------------------------------------------------------------
// Rover

TEST(Rover, BarrierAtTheParameterPose)
{
  const double eps = 0.01;
  const Se2Element q{{1.5, -2.0}, 0.7};
  const Vec k = rover::make_parameter(0.7, q, Vec::Zero(3));
  const Vec x = q.act(Vec::Zero(4));
  EXPECT_NEAR(rover::rover_h(x, k, eps).value, 0.7, 1e-15);
}

TEST(Rover, BarrierSpeedTerm)
{
  const Vec k = rover::make_parameter(1.0, Se2Element::identity(), Vec());
  EXPECT_NEAR(rover::rover_h(Vec{{0.0, 0.0, 1.0, 0.0}}, k, 0.01).value, 0.5, 1e-15);
}

TEST(Rover, BarrierSymmetry)
{
  const Se2Element q{{1.0, 0.0}, std::numbers::pi / 2.0};
  const Vec x{{1.0, 0.0, 1.0, 0.0}};
  const Vec qx = q.act(x);
  EXPECT_NEAR(qx(0), 1.0, 1e-15);
  EXPECT_NEAR(qx(1), 1.0, 1e-15);
  EXPECT_NEAR(qx(3), std::numbers::pi / 2.0, 1e-15);
  const Vec eta{{0.3}};
  const double lhs = rover::rover_h(qx, rover::make_parameter(0.8, q, eta), 0.01).value;
  const double rhs = rover::rover_h(x, rover::make_parameter(0.8, Se2Element::identity(), eta), 0.01).value;
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Rover, SeparatingHyperplaneSupport)
{
  const rover::Obstacle obs{{3.0, 0.0}, 0.5};
  // r_b = 1 for b = sqrt(1 + eps^2) - eps
  const double eps = 0.01;
  const double b = std::sqrt(1.0 + eps * eps) - eps;
  const double rb = rover::level_radius(b, eps);
  ASSERT_NEAR(rb, 1.0, 1e-12);
  const Vec k_major = rover::make_parameter(b, Se2Element::identity(), Vec{{0.0}});
  EXPECT_NEAR(rover::rover_rho(obs, 0, k_major, eps, 0.3).value, 1.2, 1e-12);
  const Vec k_minor = rover::make_parameter(b, Se2Element::identity(), Vec{{std::numbers::pi / 2.0}});
  EXPECT_NEAR(rover::rover_rho(obs, 0, k_minor, eps, 0.3).value, -1.3, 1e-12);
}

TEST(Rover, SeparatingHyperplanePointRobot)
{
  const rover::Obstacle obs{{2.0, 1.0}, 0.4};
  const Vec k = rover::make_parameter(0.0, Se2Element{{0.5, 0.5}, 0.2}, Vec{{0.4}});
  const Eigen::Vector2d n(std::cos(0.4), std::sin(0.4));
  const double point = n.dot(obs.center - Eigen::Vector2d(0.5, 0.5)) - 0.4 - 0.3;
  EXPECT_NEAR(rover::rover_rho(obs, 0, k, 0.01, 0.3).value, point, 1e-12);
}

TEST(Rover, FallbackInput)
{
  const double eps = 0.01;
  const Vec k = rover::make_parameter(1.0, Se2Element::identity(), Vec());
  EXPECT_LT(rover::rover_fallback_input(Vec::Zero(4), k, eps).norm(), 1e-15);
  const Vec u = rover::rover_fallback_input(Vec{{1.0, 0.0, 0.0, 0.0}}, k, eps);
  EXPECT_NEAR(u(0), -1.0 / std::sqrt(1.0 + eps * eps), 1e-15);
  EXPECT_NEAR(u(0), -0.99995, 1e-5);
  EXPECT_EQ(u(1), 0.0);
}

TEST(Rover, FallbackKeepsLyapunovValue)
{
  const double eps = 0.01;
  const auto dyn = rover::rover_dynamics();
  Rng rng(8);
  for (int i = 0; i < 1000; ++i) {
    const Se2Element q{{rng.uniform(-5, 5), rng.uniform(-5, 5)}, rng.uniform(-3, 3)};
    const Vec k = rover::make_parameter(1.0, q, Vec());
    const Vec x{{rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(-2, 2), rng.uniform(-4, 4)}};
    const Vec u = rover::rover_fallback_input(x, k, eps);
    const auto h = rover::rover_h(x, k, eps);
    EXPECT_LE(-h.grad_x.dot(dyn.flow(x, u)), 1e-10);
    EXPECT_LE(u.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Rover, GoldenObstaclesForSeedZero)
{
  std::ifstream in(PCBF_ASSETS_DIR "/rover_obstacles_seed0.json");
  ASSERT_TRUE(in);
  const auto golden = obstacles_from_json(nlohmann::json::parse(in));
  const auto now = rover::sample_obstacles(0);
  ASSERT_EQ(golden.size(), 15u);
  ASSERT_EQ(now.size(), golden.size());
  for (std::size_t i = 0; i < now.size(); ++i) {
    EXPECT_EQ(now[i].center, golden[i].center);
    EXPECT_EQ(now[i].radius, golden[i].radius);
  }
}

TEST(Rover, InitialParameterIsFeasible)
{
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const rover::RoverScenario sc(rover::sample_obstacles(seed));
    const Vec k = sc.initial_parameter();
    EXPECT_GE(sc.rho_values(k, 0.0).minCoeff(), 0.0);
    EXPECT_GE(sc.phi_values(sc.initial_state(), k)(0), 0.0);
    EXPECT_GT(sc.clearance(sc.initial_state(), k, 0.0), 0.0);
  }
}

// ---------------------------------------------------------------------------
// Linear

TEST(Linear, ZeroLevelReducesRhoToP)
{
  const linear::Constants c;
  linear::Parameter p;
  p.b = 0.0;
  p.L = Vec{{0.3, -0.2, 1.1}};
  p.P = Mat{{2.0, 0.1, 0.0}, {0.1, 1.0, 0.2}, {0.0, 0.2, 3.0}};
  EXPECT_EQ(linear::rho2(p), p.P);
  EXPECT_EQ(linear::rho3(c, p), p.P);
}

TEST(Linear, DirectionalDerivatives)
{
  const linear::Constants c;
  const auto set = linear::params(c);
  ASSERT_EQ(set.matrix.size(), 3u);
  Rng rng(6);
  const int nk = linear::n_k_for(3);
  for (int trial = 0; trial < 50; ++trial) {
    Vec k(nk), v(nk);
    for (int i = 0; i < nk; ++i) {
      k(i) = rng.normal();
      v(i) = rng.normal();
    }
    for (const auto & m : set.matrix) {
      EXPECT_EQ(m.dir_deriv(k, Vec::Zero(nk)).cwiseAbs().maxCoeff(), 0.0);
      const double e = 1e-6;
      const Mat fd = (m.rho(k + e * v) - m.rho(k - e * v)) / (2.0 * e);
      EXPECT_LT((m.dir_deriv(k, v) - fd).cwiseAbs().maxCoeff(), 1e-6);
      EXPECT_LE(linearity_defect(m, k, v, Vec(v.reverse()), 0.7), 1e-10);
    }
  }
}

TEST(Linear, InitialParameterPostChecks)
{
  const linear::LinearScenario sc;
  const auto & c = sc.constants();
  const Vec k = sc.initial_parameter();
  for (const auto & m : sc.params().matrix) { EXPECT_GE(min_eigenvalue(m.rho(k)), -1e-8); }
  EXPECT_GE(linear::h_value(c.x0, k, 3).value, 1e-3 - 1e-12);
  const auto p = linear::unpack(k, 3);
  const Mat acl = c.A - c.B * p.L.transpose();
  Eigen::EigenSolver<Mat> es(acl);
  EXPECT_LT(es.eigenvalues().real().maxCoeff(), 0.0);
  EXPECT_GE(min_eigenvalue(p.P), 1e-6 - 1e-12);
}

TEST(Linear, LyapunovSolver)
{
  const Mat acl{{-1.0, 2.0, 0.0}, {0.0, -3.0, 1.0}, {0.5, 0.0, -2.0}};
  const Mat q = Mat::Identity(3, 3);
  const Mat p = linear::lyapunov(acl, q);
  EXPECT_LT((acl.transpose() * p + p * acl + q).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Linear, BaselineAtOrigin)
{
  EXPECT_EQ(linear::lqr_baseline({}, Vec::Zero(3)), 0.0);
}

TEST(Linear, BaselineIsTheLqrLawForS)
{
  const linear::Constants c;
  const Mat q = c.S * c.B * c.B.transpose() * c.S - c.A.transpose() * c.S - c.S * c.A;
  Mat expected = Mat::Zero(3, 3);
  expected(0, 0) = 1.0;
  EXPECT_LT((q - expected).cwiseAbs().maxCoeff(), 1e-12);
  const Vec x{{0.3, -1.2, 2.0}};
  EXPECT_NEAR(linear::lqr_baseline(c, x), -(x(0) + 2.0 * x(1) + 2.0 * x(2)), 1e-14);
}

TEST(Linear, BaselineDecaysButViolatesOutputBound)
{
  linear::LinearScenario sc;
  linear::LqrBaselineController ctl(sc);
  SimConfig cfg;
  cfg.dt_ctrl = 0.0025;
  const auto trace = run(sc, ctl, cfg);
  double worst = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < trace.size(); ++i) {
    worst = std::max(worst, std::abs(trace[i].x(1)));
    if (i % 400 != 0) { continue; }
    const double v = linear::clf(sc.constants(), trace[i].x).value;
    EXPECT_LT(v, prev) << "t = " << trace[i].t;
    prev = v;
  }
  EXPECT_LT(prev / linear::clf(sc.constants(), trace.front().x).value, 1e-2);
  EXPECT_GT(worst, 1.0);
}

TEST(Config, Errors)
{
  ScenarioConfig c;
  c.scenario = "boat";
  EXPECT_THROW(c.validate(), ConfigError);
  c.scenario = "acc";
  c.profile = 4;
  EXPECT_THROW(c.validate(), ConfigError);
  c.profile = 1;
  c.dt_ctrl = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json{{"scenario", "acc"}, {"colour", 1}}), ConfigError);
  EXPECT_THROW(run_scenario(parse_config(nlohmann::json{{"scenario", "acc"}, {"overrides", {{"no_such_field", 1.0}}}})),
               ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}
