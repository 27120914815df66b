#pragma once

#include <exception>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcbf/scenarios/config.hpp"
#include "pcbf/sim.hpp"

namespace pcbf {

inline nlohmann::json obstacles_to_json(const std::vector<rover::Obstacle> & obstacles)
{
  nlohmann::json arr = nlohmann::json::array();
  for (const auto & o : obstacles) { arr.push_back({{"x", o.center.x()}, {"y", o.center.y()}, {"r", o.radius}}); }
  return arr;
}

inline std::vector<rover::Obstacle> obstacles_from_json(const nlohmann::json & arr)
{
  std::vector<rover::Obstacle> out;
  try {
    for (const auto & o : arr) {
      rover::Obstacle ob;
      ob.center = {o.at("x").get<double>(), o.at("y").get<double>()};
      ob.radius = o.at("r").get<double>();
      out.push_back(ob);
    }
  } catch (const nlohmann::json::exception & e) {
    throw ConfigError(std::string("bad obstacle list: ") + e.what());
  }
  return out;
}

/// Result of running one configured scenario to completion or to its first fault.
struct RunOutcome
{
  ScenarioConfig config;
  std::vector<TraceRecord> trace;
  std::optional<std::string> fault;
  TraceStats stats;
  nlohmann::json extra = nlohmann::json::object();  ///< scenario-specific summary values
  nlohmann::json scene = nlohmann::json::object();  ///< static data the plots need

  /// No fault and every barrier and parameter constraint stayed above -tol.
  bool safe(double tol = 1e-4) const { return !fault && stats.min_phi >= -tol && stats.min_rho >= -tol; }

  nlohmann::json stats_json() const
  {
    nlohmann::json j = to_json(stats);
    j["scenario"] = config.scenario;
    j["seed"] = config.seed;
    if (config.scenario == "acc") { j["profile"] = config.profile; }
    j["dt_ctrl"] = config.sim().dt_ctrl;
    j["fault"] = fault ? nlohmann::json(*fault) : nlohmann::json(nullptr);
    for (const auto & [key, value] : extra.items()) { j[key] = value; }
    return j;
  }
};

namespace detail {

template<class S, class C>
void simulate_into(RunOutcome & out, const S & sc, C & ctl)
{
  try {
    out.trace = run(sc, ctl, out.config.sim());
  } catch (const RunAborted & e) {
    out.trace = e.partial_trace();
    out.fault = e.what();
  }
  if (out.trace.empty()) { throw Error(out.fault.value_or("run produced no records")); }
  out.stats = trace_stats(out.trace);
}

inline double max_abs_coord(const std::vector<TraceRecord> & trace, Eigen::Index i)
{
  double m = 0.0;
  for (const auto & r : trace) { m = std::max(m, std::abs(r.x(i))); }
  return m;
}

}  // namespace detail

inline RunOutcome run_acc(const ScenarioConfig & cfg)
{
  RunOutcome out;
  out.config = cfg;
  acc::AccScenario sc(cfg.profile, acc_constants(cfg));
  acc::AccController ctl(sc);
  detail::simulate_into(out, sc, ctl);
  const auto & last = out.trace.back();
  out.extra["min_gap"] = out.stats.min_clearance;
  out.extra["final_x1"] = last.x(0);
  out.extra["final_speed"] = last.x(1);
  out.extra["final_gap"] = last.clearance;
  out.scene = {{"scenario", "acc"}, {"profile", cfg.profile}, {"delta", sc.constants().delta}};
  return out;
}

inline RunOutcome run_rover(const ScenarioConfig & cfg, std::optional<std::vector<rover::Obstacle>> obstacles = std::nullopt)
{
  RunOutcome out;
  out.config = cfg;
  const rover::Constants c = rover_constants(cfg);
  if (!obstacles) { obstacles = rover::sample_obstacles(cfg.seed, c); }
  rover::RoverScenario sc(*obstacles, c);
  rover::AggressiveDriver driver(*obstacles);
  rover::RoverController ctl(sc, [&driver](double t, const Vec & x) { return driver(t, x); });
  detail::simulate_into(out, sc, ctl);
  out.extra["min_h"] = out.stats.min_phi;
  out.scene = {{"scenario", "rover"},
               {"robot_radius", c.robot_radius},
               {"eps", c.eps},
               {"obstacles", obstacles_to_json(*obstacles)}};
  return out;
}

inline RunOutcome run_linear(const ScenarioConfig & cfg)
{
  RunOutcome out;
  out.config = cfg;
  linear::LinearScenario sc(linear_constants(cfg));
  linear::ClfPcbfController ctl(sc);
  detail::simulate_into(out, sc, ctl);

  const auto & c = sc.constants();
  const double v0 = linear::clf(c, out.trace.front().x).value;
  const double vf = linear::clf(c, out.trace.back().x).value;
  out.extra["max_abs_x2"] = detail::max_abs_coord(out.trace, 1);
  out.extra["V0"] = v0;
  out.extra["V_final"] = vf;
  out.extra["V_ratio"] = vf / v0;
  out.extra["lambda_min_each"] = out.stats.min_rho_each;
  out.extra["init_attempts"] = sc.init_report().attempts;
  out.extra["init_r_lqr"] = sc.init_report().r_lqr;

  linear::LqrBaselineController base(sc);
  std::vector<TraceRecord> baseline;
  try {
    baseline = run(sc, base, cfg.sim());
  } catch (const RunAborted & e) {
    baseline = e.partial_trace();
  }
  if (!baseline.empty()) { out.extra["baseline_max_abs_x2"] = detail::max_abs_coord(baseline, 1); }
  out.scene = {{"scenario", "linear"}};
  return out;
}

inline RunOutcome run_scenario(const ScenarioConfig & cfg)
{
  cfg.validate();
  if (cfg.scenario == "acc") { return run_acc(cfg); }
  if (cfg.scenario == "rover") { return run_rover(cfg); }
  return run_linear(cfg);
}

}  // namespace pcbf
