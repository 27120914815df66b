#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "pcbf/errors.hpp"
#include "pcbf/scenarios/acc.hpp"
#include "pcbf/scenarios/linear.hpp"
#include "pcbf/scenarios/rover.hpp"
#include "pcbf/sim.hpp"

namespace pcbf {

/// {"scenario": ..., "seed": n, "profile": 1|2|3, "t_final": s, "dt_ctrl": s, "overrides": {name: value}}
struct ScenarioConfig
{
  std::string scenario;
  std::uint64_t seed = 0;
  int profile = 1;
  std::optional<double> t_final;
  std::optional<double> dt_ctrl;
  nlohmann::json overrides = nlohmann::json::object();

  static double default_t_final(const std::string & name) { return name == "rover" ? 60.0 : 20.0; }

  /// ACC runs at 4 kHz, linear at 400 Hz, rover at 100 Hz.
  static double default_dt_ctrl(const std::string & name)
  {
    if (name == "linear") { return 0.0025; }
    if (name == "acc") { return 0.00025; }
    return 0.01;
  }

  SimConfig sim() const
  {
    SimConfig s;
    s.t_final = t_final.value_or(default_t_final(scenario));
    s.dt_ctrl = dt_ctrl.value_or(default_dt_ctrl(scenario));
    s.seed = seed;
    return s;
  }

  void validate() const
  {
    if (scenario != "acc" && scenario != "rover" && scenario != "linear") {
      throw ConfigError("unknown scenario '" + scenario + "'");
    }
    if (profile < 1 || profile > 3) { throw ConfigError("profile must be 1, 2 or 3"); }
    if (!overrides.is_object()) { throw ConfigError("overrides must be an object"); }
    try {
      sim().validate();
    } catch (const InvalidArgument & e) {
      throw ConfigError(e.what());
    }
  }
};

/// `partial` skips validation so command-line flags can fill in missing fields.
inline ScenarioConfig parse_config(const nlohmann::json & j, bool partial = false)
{
  if (!j.is_object()) { throw ConfigError("config must be a JSON object"); }
  ScenarioConfig c;
  try {
    for (const auto & [key, value] : j.items()) {
      if (key == "scenario") {
        c.scenario = value.get<std::string>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else if (key == "profile") {
        c.profile = value.get<int>();
      } else if (key == "t_final") {
        c.t_final = value.get<double>();
      } else if (key == "dt_ctrl") {
        c.dt_ctrl = value.get<double>();
      } else if (key == "overrides") {
        c.overrides = value;
      } else {
        throw ConfigError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception & e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  if (!partial) { c.validate(); }
  return c;
}

inline ScenarioConfig load_config(const std::string & path, bool partial = false)
{
  std::ifstream in(path);
  if (!in) { throw ConfigError("cannot open config '" + path + "'"); }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error & e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(j, partial);
}

namespace detail {

inline void apply_overrides(const nlohmann::json & overrides, const std::map<std::string, double *> & fields)
{
  for (const auto & [key, value] : overrides.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) { throw ConfigError("unknown override '" + key + "'"); }
    if (!value.is_number()) { throw ConfigError("override '" + key + "' must be a number"); }
    *it->second = value.get<double>();
  }
}

}  // namespace detail

inline acc::Constants acc_constants(const ScenarioConfig & cfg)
{
  acc::Constants c;
  detail::apply_overrides(cfg.overrides, {{"u_lower", &c.u_lower}, {"u_upper", &c.u_upper}, {"delta", &c.delta},
                                          {"eps", &c.eps}, {"a", &c.a}, {"gamma", &c.gamma}, {"beta", &c.beta_slope},
                                          {"mu", &c.mu}, {"gain", &c.gain}, {"v_ref", &c.v_ref}, {"k0", &c.k0}});
  if (!c.valid()) { log().warn("acc: a < -2/u_L, the order-2 row is not guaranteed feasible"); }
  return c;
}

inline rover::Constants rover_constants(const ScenarioConfig & cfg)
{
  rover::Constants c;
  double n_obstacles = c.n_obstacles;
  detail::apply_overrides(cfg.overrides, {{"robot_radius", &c.robot_radius}, {"eps", &c.eps}, {"n_obstacles", &n_obstacles},
                                          {"alpha", &c.alpha_slope}, {"beta", &c.beta_slope}, {"mu", &c.mu}, {"b0", &c.b0},
                                          {"field_half_width", &c.field_half_width}, {"radius_min", &c.radius_min},
                                          {"radius_max", &c.radius_max}, {"start_margin", &c.start_margin}});
  if (n_obstacles < 0.0 || n_obstacles != std::floor(n_obstacles)) { throw ConfigError("n_obstacles must be a whole number"); }
  c.n_obstacles = static_cast<int>(n_obstacles);
  return c;
}

inline linear::Constants linear_constants(const ScenarioConfig & cfg)
{
  linear::Constants c;
  detail::apply_overrides(cfg.overrides, {{"mu", &c.mu}, {"nu", &c.nu}, {"alpha_clf", &c.alpha_clf},
                                          {"alpha_h", &c.alpha_h}, {"gamma", &c.gamma}, {"u_bound", &c.u_bound}});
  return c;
}

}  // namespace pcbf
