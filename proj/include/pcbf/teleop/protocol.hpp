#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcbf/linalg.hpp"
#include "pcbf/scenarios/runner.hpp"

namespace pcbf::teleop {

enum class Role { Driver, Observer };

inline std::string to_string(Role r) { return r == Role::Driver ? "driver" : "observer"; }

struct Hello
{
  Role role = Role::Observer;
};

struct UrefMessage
{
  double ax = 0.0;
  double steer = 0.0;
};

struct ResetMessage
{
  std::uint64_t seed = 0;
};

struct BadMessage
{
  std::string detail;
};

using ClientMessage = std::variant<Hello, UrefMessage, ResetMessage, BadMessage>;

inline double clip_unit(double v) { return std::clamp(v, -1.0, 1.0); }

/// Parses one client frame. Never throws; anything off-protocol becomes BadMessage.
inline ClientMessage parse_client_message(const std::string & text)
{
  const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) { return BadMessage{"invalid JSON"}; }
  if (!j.is_object()) { return BadMessage{"message must be an object"}; }
  const auto type = j.find("type");
  if (type == j.end() || !type->is_string()) { return BadMessage{"missing type"}; }
  const std::string t = type->get<std::string>();
  if (t == "hello") {
    const auto role = j.find("role");
    if (role == j.end() || !role->is_string()) { return BadMessage{"hello needs a role"}; }
    if (*role == "driver") { return Hello{Role::Driver}; }
    if (*role == "observer") { return Hello{Role::Observer}; }
    return BadMessage{"unknown role"};
  }
  if (t == "uref") {
    const auto ax = j.find("ax");
    const auto steer = j.find("steer");
    if (ax == j.end() || steer == j.end() || !ax->is_number() || !steer->is_number()) {
      return BadMessage{"uref needs numeric ax and steer"};
    }
    const double a = ax->get<double>();
    const double s = steer->get<double>();
    if (!std::isfinite(a) || !std::isfinite(s)) { return BadMessage{"uref values must be finite"}; }
    return UrefMessage{clip_unit(a), clip_unit(s)};
  }
  if (t == "reset") {
    const auto seed = j.find("seed");
    if (seed == j.end()) { return ResetMessage{0}; }
    if (!seed->is_number_unsigned()) { return BadMessage{"seed must be a non-negative integer"}; }
    return ResetMessage{seed->get<std::uint64_t>()};
  }
  return BadMessage{"unknown type"};
}

inline std::string error_message(const std::string & code, const std::string & detail = {})
{
  nlohmann::json j{{"type", "error"}, {"code", code}};
  if (!detail.empty()) { j["detail"] = detail; }
  return j.dump();
}

inline nlohmann::json vec_json(const Vec & v) { return std::vector<double>(v.data(), v.data() + v.size()); }

inline Vec json_vec(const nlohmann::json & j)
{
  const auto d = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(d.data(), static_cast<Eigen::Index>(d.size()));
}

/// One broadcast frame of the live rover loop.
struct Snapshot
{
  double t = 0.0;
  Vec x, k, u_ref, u_applied, v;
  double h = 0.0;
  Vec rho;
  double clearance = 0.0;
  bool intervening = false;
  std::uint64_t epoch = 0;  ///< bumps on every reset; obstacles are resent when it changes
  std::optional<std::string> fault;
  double deadline_miss_rate = 0.0;
};

inline bool intervening(const Vec & u, const Vec & u_ref) { return (u - u_ref).cwiseAbs().maxCoeff() > 1e-3; }

inline nlohmann::json to_json(const Snapshot & s)
{
  nlohmann::json j{{"type", s.fault ? "fault" : "snapshot"},
                   {"t", s.t},
                   {"x", vec_json(s.x)},
                   {"k", vec_json(s.k)},
                   {"u_ref", vec_json(s.u_ref)},
                   {"u_applied", vec_json(s.u_applied)},
                   {"v", vec_json(s.v)},
                   {"h", s.h},
                   {"rho", vec_json(s.rho)},
                   {"clearance", s.clearance},
                   {"intervening", s.intervening},
                   {"epoch", s.epoch},
                   {"deadline_miss_rate", s.deadline_miss_rate}};
  if (s.fault) { j["fault"] = *s.fault; }
  return j;
}

/// Inverse of to_json; throws MalformedTrace on missing or mistyped fields.
inline Snapshot snapshot_from_json(const nlohmann::json & j)
{
  try {
    Snapshot s;
    s.t = j.at("t").get<double>();
    s.x = json_vec(j.at("x"));
    s.k = json_vec(j.at("k"));
    s.u_ref = json_vec(j.at("u_ref"));
    s.u_applied = json_vec(j.at("u_applied"));
    s.v = json_vec(j.at("v"));
    s.h = j.at("h").get<double>();
    s.rho = json_vec(j.at("rho"));
    s.clearance = j.at("clearance").get<double>();
    s.intervening = j.at("intervening").get<bool>();
    s.epoch = j.at("epoch").get<std::uint64_t>();
    s.deadline_miss_rate = j.at("deadline_miss_rate").get<double>();
    if (j.contains("fault")) { s.fault = j.at("fault").get<std::string>(); }
    return s;
  } catch (const nlohmann::json::exception & e) {
    throw MalformedTrace(std::string("bad snapshot: ") + e.what());
  }
}

/**
 * Doubles are written with 17 significant digits so every field parses back
 * to the identical value.
 */
inline std::string serialize(const nlohmann::json & j)
{
  std::string out;
  auto write = [&out](auto && self, const nlohmann::json & v) -> void {
    switch (v.type()) {
      case nlohmann::json::value_t::object: {
        out += '{';
        bool first = true;
        for (const auto & [key, item] : v.items()) {
          if (!first) { out += ','; }
          first = false;
          out += nlohmann::json(key).dump();
          out += ':';
          self(self, item);
        }
        out += '}';
        break;
      }
      case nlohmann::json::value_t::array: {
        out += '[';
        for (std::size_t i = 0; i < v.size(); ++i) {
          if (i) { out += ','; }
          self(self, v[i]);
        }
        out += ']';
        break;
      }
      case nlohmann::json::value_t::number_float: {
        const double d = v.get<double>();
        if (!std::isfinite(d)) {
          out += "null";
        } else {
          char buf[32];
          std::snprintf(buf, sizeof buf, "%.17g", d);
          out += buf;
        }
        break;
      }
      default: out += v.dump();
    }
  };
  write(write, j);
  return out;
}

inline std::string welcome_message(Role role, const std::string & session, const std::vector<rover::Obstacle> & obstacles,
                                   const rover::Constants & c, std::uint64_t epoch, bool rejected = false)
{
  nlohmann::json j{{"type", "welcome"},
                   {"role", to_string(role)},
                   {"session", session},
                   {"epoch", epoch},
                   {"robot_radius", c.robot_radius},
                   {"eps", c.eps},
                   {"obstacles", obstacles_to_json(obstacles)}};
  if (rejected) { j["rejected"] = "driver_taken"; }
  return serialize(j);
}

}  // namespace pcbf::teleop
