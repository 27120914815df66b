#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <fmt/format.h>

#include "pcbf/oracles.hpp"
#include "pcbf/scenarios/runner.hpp"
#include "pcbf/suites.hpp"
#include "pcbf/teleop/bot.hpp"
#include "pcbf/teleop/server.hpp"

using namespace pcbf;

namespace {

using Clock = std::chrono::steady_clock;

struct Verdict
{
  bool pass = true;
  std::vector<std::string> notes;

  void at_most(const std::string & what, double value, double bound)
  {
    const bool ok = value <= bound;
    pass = pass && ok;
    notes.push_back(fmt::format("{} {:.3e} {} {:.1e}", what, value, ok ? "<=" : "NOT <=", bound));
  }

  void at_least(const std::string & what, double value, double bound)
  {
    const bool ok = value >= bound;
    pass = pass && ok;
    notes.push_back(fmt::format("{} {:.3e} {} {:.1e}", what, value, ok ? ">=" : "NOT >=", bound));
  }

  void require(const std::string & what, bool ok)
  {
    pass = pass && ok;
    notes.push_back(what + (ok ? " yes" : " NO"));
  }
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

Verdict qp_oracle()
{
  const auto t0 = Clock::now();
  Rng rng(2024);
  double dev = 0.0, kkt = 0.0;
  int mismatch = 0;
  for (int i = 0; i < 500; ++i) {
    const auto qp = oracle::random_qp(rng);
    const auto sol = solve_qp(qp);
    const auto ref = oracle::brute_force_qp(qp);
    if (!ref || sol.status != QpStatus::Optimal) {
      mismatch += (ref.has_value() != (sol.status == QpStatus::Optimal));
      continue;
    }
    dev = std::max(dev, (sol.z - *ref).cwiseAbs().maxCoeff());
    const auto r = kkt_residuals(qp, sol);
    kkt = std::max({kkt, r.stationarity, r.primal, r.complementarity, r.dual});
  }
  Verdict v;
  v.at_most("max |z - z_enum|", dev, 1e-6);
  v.at_most("max KKT residual", kkt, 1e-8);
  v.at_most("status mismatches", mismatch, 0);
  v.at_most("runtime s", seconds_since(t0), 10.0);
  return v;
}

/// Wraps the CLF-PCBF-QP controller and audits each step's LMIs independently.
struct AuditedLinear
{
  linear::ClfPcbfController inner;
  Rng rng{99};
  double eig_min = std::numeric_limits<double>::infinity();
  double sample_min = std::numeric_limits<double>::infinity();
  double audit_seconds = 0.0;
  int steps = 0;

  ControlAction operator()(const Vec & x, const Vec & k, double t)
  {
    ControlAction a = inner(x, k, t);
    const auto t0 = Clock::now();
    ++steps;
    for (const auto & lmi : inner.last().rows.lmis) {
      const Mat m = lmi.evaluate(inner.last().v);
      eig_min = std::min(eig_min, min_eigenvalue(m));
      Vec xi(m.rows());
      for (int s = 0; s < 10000; ++s) {
        for (Eigen::Index i = 0; i < xi.size(); ++i) { xi(i) = rng.normal(); }
        sample_min = std::min(sample_min, xi.dot(m * xi) / xi.squaredNorm());
      }
    }
    audit_seconds += seconds_since(t0);
    return a;
  }
};

Verdict cutting_plane_soundness()
{
  const auto t0 = Clock::now();
  const linear::LinearScenario sc;
  AuditedLinear ctl{linear::ClfPcbfController(sc)};
  ScenarioConfig c;
  c.scenario = "linear";
  c.t_final = 20.0;
  const SimConfig cfg = c.sim();
  Verdict v;
  try {
    run(sc, ctl, cfg);
  } catch (const RunAborted & e) {
    v.require(std::string("run completed (") + e.what() + ")", false);
  }
  v.at_least("steps audited", ctl.steps, cfg.steps() + 1);
  v.at_least("min eigenvalue over steps", ctl.eig_min, -1e-6);
  v.at_least("min sampled xi' M xi", ctl.sample_min, -1e-6);
  v.at_most("runtime s excluding audit", seconds_since(t0) - ctl.audit_seconds, 30.0);
  return v;
}

void check_rover_trace(Verdict & v, const std::vector<TraceRecord> & trace, const std::string & tag)
{
  const auto st = trace_stats(trace);
  v.at_least(tag + " min h", st.min_phi, -1e-4);
  v.at_least(tag + " min rho", st.min_rho, -1e-4);
  v.at_least(tag + " min clearance", st.min_clearance, -1e-6);
  v.at_most(tag + " max |u|", st.max_abs_u, 1.0);
}

Verdict rover_invariance()
{
  const auto t0 = Clock::now();
  Verdict v;
  double min_h = std::numeric_limits<double>::infinity(), min_rho = min_h, min_clr = min_h, max_u = 0.0;
  int faults = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ScenarioConfig c;
    c.scenario = "rover";
    c.seed = seed;
    c.t_final = 60.0;
    const auto out = run_scenario(c);
    faults += out.fault.has_value();
    min_h = std::min(min_h, out.stats.min_phi);
    min_rho = std::min(min_rho, out.stats.min_rho);
    min_clr = std::min(min_clr, out.stats.min_clearance);
    max_u = std::max(max_u, out.stats.max_abs_u);
  }
  v.at_most("faults", faults, 0);
  v.at_least("min h", min_h, -1e-4);
  v.at_least("min rho", min_rho, -1e-4);
  v.at_least("min clearance", min_clr, -1e-6);
  v.at_most("max |u|", max_u, 1.0);
  v.at_most("runtime s", seconds_since(t0), 60.0);
  return v;
}

Verdict acc_gap()
{
  const auto t0 = Clock::now();
  Verdict v;
  for (int profile = 1; profile <= 3; ++profile) {
    ScenarioConfig c;
    c.scenario = "acc";
    c.profile = profile;
    const auto out = run_scenario(c);
    const std::string tag = "p" + std::to_string(profile);
    v.require(tag + " no fault", !out.fault);
    v.at_least(tag + " min gap", out.stats.min_clearance, 0.5 - 1e-4);
    v.at_least(tag + " min phi", out.stats.min_phi, -1e-4);
    v.at_least(tag + " min rho", out.stats.min_rho, -1e-4);
    v.at_most(tag + " max |u|", out.stats.max_abs_u, 1.0);
    if (profile == 3) {
      const auto & last = out.trace.back();
      v.at_most("p3 final speed", std::abs(last.x(1)), 1e-2);
      v.at_most("p3 final x1", last.x(0), 6.0 - 0.5 + 1e-4);
    }
  }
  v.at_most("runtime s", seconds_since(t0), 10.0);
  return v;
}

Verdict linear_output_bound()
{
  const auto t0 = Clock::now();
  ScenarioConfig c;
  c.scenario = "linear";
  const auto out = run_scenario(c);
  Verdict v;
  v.require("no fault", !out.fault);
  v.at_most("max |x2|", out.extra["max_abs_x2"].get<double>(), 1.0 + 1e-4);
  v.at_most("V(20) / V(0)", out.extra["V_ratio"].get<double>(), 1e-2);
  for (std::size_t i = 0; i < 3; ++i) {
    v.at_least("min lambda rho_" + std::to_string(i + 1), out.stats.min_rho_each.at(i), -1e-6);
  }
  v.at_least("baseline max |x2|", out.extra["baseline_max_abs_x2"].get<double>(), 1.0 + 1e-12);
  v.at_most("runtime s", seconds_since(t0), 30.0);
  return v;
}

Verdict from_suites(const std::vector<std::string> & names, int reduction_count = 0)
{
  Verdict v;
  std::vector<suites::SuiteResult> results;
  if (reduction_count > 0) {
    results.push_back(suites::reduction_suite({}, reduction_count));
  } else {
    results = suites::run(names, {});
  }
  for (const auto & r : results) {
    for (const auto & c : r.checks) {
      if (c.relation == "<=") {
        v.at_most(c.name, c.value, c.threshold);
      } else {
        v.at_least(c.name, c.value, c.threshold);
      }
    }
  }
  return v;
}

Verdict teleop_headless()
{
  teleop::TeleopOptions opt;
  opt.scenario = teleop::rover_config(0);
  teleop::Server server(opt, "127.0.0.1:0");
  server.start();
  const auto bot = teleop::run_aggressive_bot("127.0.0.1", server.port(), std::chrono::seconds(60));
  const int replies = teleop::run_fuzzer("127.0.0.1", server.port(), 100000, 7);
  std::this_thread::sleep_for(std::chrono::milliseconds(200));
  const std::string health = teleop::http_get("127.0.0.1", server.port(), "/healthz");
  server.stop();

  const auto & core = server.core();
  Verdict v;
  v.require("bot held the driver role", bot.got_driver);
  v.at_least("snapshots received", bot.snapshots, 60 * 20);
  v.at_least("fuzz replies", replies, 1);
  v.require("healthz after fuzz", health.find("\"ok\"") != std::string::npos);
  v.require("loop not frozen", !core.fault());
  check_rover_trace(v, core.trace(), "trace");
  v.at_most("deadline miss rate", core.deadline_miss_rate(), 0.01);
  return v;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Acceptance gate: one PASS/FAIL line per criterion"};
  std::vector<int> only;
  std::vector<int> expect_fail;
  app.add_option("--only", only, "criteria to run (default all)")->delimiter(',');
  app.add_option("--expect-fail", expect_fail, "criteria known to fail; any other outcome is an error")->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::err);
  pcbf::log().set_level(spdlog::level::err);

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria{
    {"QP oracle equivalence", qp_oracle},
    {"cutting-plane soundness", cutting_plane_soundness},
    {"rover invariance, 20 seeds x 60 s", rover_invariance},
    {"ACC gap maintenance", acc_gap},
    {"linear output bound and CLF decay", linear_output_bound},
    {"reductions", [] { return from_suites({}, 200); }},
    {"validity suites", [] { return from_suites({"gradients", "chain", "symmetry", "separation", "acc_validity", "fallback"}); }},
    {"teleop headless", teleop_headless},
  };

  const std::set<int> expected(expect_fail.begin(), expect_fail.end());
  std::set<int> failed;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) { continue; }
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception & e) {
      v.require(std::string("no exception (") + e.what() + ")", false);
    }
    if (!v.pass) { failed.insert(id); }
    std::ostringstream detail;
    for (std::size_t n = 0; n < v.notes.size(); ++n) { detail << (n ? "; " : "") << v.notes[n]; }
    std::cout << fmt::format("criterion {} {}  {} [{:.1f} s]  {}", id, v.pass ? "PASS" : "FAIL", criteria[i].first,
                             seconds_since(t0), detail.str())
              << std::endl;
  }

  std::set<int> expected_run;
  for (int id : expected) {
    if (only.empty() || std::find(only.begin(), only.end(), id) != only.end()) { expected_run.insert(id); }
  }
  int status = 0;
  for (int id : failed) {
    if (!expected_run.contains(id)) {
      std::cout << "unexpected failure: criterion " << id << "\n";
      status = 1;
    }
  }
  for (int id : expected_run) {
    if (!failed.contains(id)) {
      std::cout << "unexpected pass: criterion " << id << " is listed in --expect-fail\n";
      status = 1;
    }
  }
  if (!expected_run.empty()) {
    std::cout << "known failures: ";
    for (int id : expected_run) { std::cout << id << ' '; }
    std::cout << "(see README, Known limitations)\n";
  }
  return status;
}
