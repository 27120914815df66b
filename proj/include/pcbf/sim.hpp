#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcbf/cbf_types.hpp"
#include "pcbf/errors.hpp"
#include "pcbf/qp.hpp"

namespace pcbf {

struct SimConfig
{
  double dt_ctrl = 0.01;
  int substeps = 10;
  double t_final = 20.0;
  std::uint64_t seed = 0;

  void validate() const
  {
    if (!(dt_ctrl > 0.0) || substeps < 1 || !(t_final > 0.0)) { throw InvalidArgument("invalid simulation config"); }
  }

  int steps() const { return static_cast<int>(std::llround(t_final / dt_ctrl)); }
};

struct TraceRecord
{
  double t = 0.0;
  Vec x, k, u_ref, u, v;
  Vec phi;  ///< phi_0 .. phi_{r-1}
  Vec rho;  ///< scalar rho values, then lambda_min per matrix rho
  double clearance = std::numeric_limits<double>::quiet_NaN();
  int qp_iterations = 0;
  QpStatus qp_status = QpStatus::Optimal;
  std::optional<double> slack;
};

/// What a controller returns at one control instant.
struct ControlAction
{
  Vec u_ref, u, v;
  std::optional<double> slack;
  int qp_iterations = 0;
  QpStatus qp_status = QpStatus::Optimal;
};

template<class S>
concept Scenario = requires(const S & s, const Vec & x, const Vec & k, double t) {
  { s.dynamics() } -> std::convertible_to<const Dynamics &>;
  { s.initial_state() } -> std::convertible_to<Vec>;
  { s.initial_parameter() } -> std::convertible_to<Vec>;
  { s.phi_values(x, k) } -> std::convertible_to<Vec>;
  { s.rho_values(k, t) } -> std::convertible_to<Vec>;
  { s.clearance(x, k, t) } -> std::convertible_to<double>;
};

template<class C>
concept Controller = requires(C & c, const Vec & x, const Vec & k, double t) {
  { c(x, k, t) } -> std::same_as<ControlAction>;
};

/// Classical RK4 step with u held constant.
inline Vec rk4_step(const Dynamics & dyn, const Vec & x, const Vec & u, double dt)
{
  if (!(dt > 0.0)) { throw InvalidArgument("rk4 step must be positive"); }
  auto check = [](const Vec & v) {
    if (!v.allFinite()) { throw NonFinite("non-finite value in RK4 stage"); }
    return v;
  };
  const Vec k1 = check(dyn.flow(x, u));
  const Vec k2 = check(dyn.flow(x + 0.5 * dt * k1, u));
  const Vec k3 = check(dyn.flow(x + 0.5 * dt * k2, u));
  const Vec k4 = check(dyn.flow(x + dt * k3, u));
  return check(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

/// A fault during `run`, with the trace recorded up to that point.
class RunAborted : public Error
{
public:
  RunAborted(const std::string & what, std::vector<TraceRecord> partial, std::exception_ptr cause)
      : Error(what), partial_(std::move(partial)), cause_(std::move(cause))
  {}

  const std::vector<TraceRecord> & partial_trace() const noexcept { return partial_; }
  std::exception_ptr cause() const noexcept { return cause_; }

private:
  std::vector<TraceRecord> partial_;
  std::exception_ptr cause_;
};

/// Trace record for one control instant.
template<Scenario S>
TraceRecord make_record(const S & scenario, const Vec & x, const Vec & k, double t, ControlAction act)
{
  TraceRecord rec;
  rec.t = t;
  rec.x = x;
  rec.k = k;
  rec.phi = scenario.phi_values(x, k);
  rec.rho = scenario.rho_values(k, t);
  rec.clearance = scenario.clearance(x, k, t);
  rec.u_ref = std::move(act.u_ref);
  rec.u = std::move(act.u);
  rec.v = std::move(act.v);
  rec.qp_iterations = act.qp_iterations;
  rec.qp_status = act.qp_status;
  rec.slack = act.slack;
  return rec;
}

/// Holds (u, v) over one control period: `substeps` RK4 substeps, k += v * h after each.
inline void advance(const Dynamics & dyn, Vec & x, Vec & k, const Vec & u, const Vec & v, const SimConfig & cfg)
{
  const double h = cfg.dt_ctrl / cfg.substeps;
  for (int s = 0; s < cfg.substeps; ++s) {
    x = rk4_step(dyn, x, u, h);
    if (v.size()) { k += h * v; }
  }
  if (!k.allFinite()) { throw NonFinite("non-finite parameter"); }
}

/**
 * Zero-order-hold closed loop: at t_i = i * dt_ctrl (i = 0..steps) the
 * controller is evaluated and recorded; (u, v) are then held over `substeps`
 * RK4 substeps while k advances by v * h per substep.
 */
template<Scenario S, Controller C>
std::vector<TraceRecord> run(const S & scenario, C & controller, const SimConfig & cfg)
{
  cfg.validate();
  Vec x = scenario.initial_state();
  Vec k = scenario.initial_parameter();
  const int steps = cfg.steps();

  std::vector<TraceRecord> trace;
  trace.reserve(static_cast<std::size_t>(steps) + 1);
  for (int i = 0; i <= steps; ++i) {
    const double t = i * cfg.dt_ctrl;
    try {
      trace.push_back(make_record(scenario, x, k, t, controller(x, k, t)));
      if (i == steps) { break; }
      advance(scenario.dynamics(), x, k, trace.back().u, trace.back().v, cfg);
    } catch (const std::exception & e) {
      throw RunAborted(std::string("run aborted at t=") + std::to_string(t) + ": " + e.what(), std::move(trace),
                       std::current_exception());
    }
  }
  return trace;
}

struct TraceStats
{
  std::size_t records = 0;
  double t_final = 0.0;
  double min_phi = std::numeric_limits<double>::infinity();
  double min_rho = std::numeric_limits<double>::infinity();
  double min_clearance = std::numeric_limits<double>::infinity();
  double max_abs_u = 0.0;
  double deviation_integral = 0.0;  ///< integral of |u - u_ref|^2
  double param_rate_integral = 0.0; ///< integral of |v|^2
  double slack_integral = 0.0;      ///< integral of s^2
  std::vector<double> min_phi_each;
  std::vector<double> min_rho_each;
};

inline TraceStats trace_stats(const std::vector<TraceRecord> & trace)
{
  if (trace.empty()) { throw EmptyTrace(); }
  TraceStats st;
  st.records = trace.size();
  st.t_final = trace.back().t;
  st.min_phi_each.assign(static_cast<std::size_t>(trace.front().phi.size()), std::numeric_limits<double>::infinity());
  st.min_rho_each.assign(static_cast<std::size_t>(trace.front().rho.size()), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto & r = trace[i];
    for (Eigen::Index j = 0; j < r.phi.size(); ++j) {
      st.min_phi = std::min(st.min_phi, r.phi(j));
      auto & e = st.min_phi_each[static_cast<std::size_t>(j)];
      e = std::min(e, r.phi(j));
    }
    for (Eigen::Index j = 0; j < r.rho.size(); ++j) {
      st.min_rho = std::min(st.min_rho, r.rho(j));
      auto & e = st.min_rho_each[static_cast<std::size_t>(j)];
      e = std::min(e, r.rho(j));
    }
    if (!std::isnan(r.clearance)) { st.min_clearance = std::min(st.min_clearance, r.clearance); }
    if (r.u.size()) { st.max_abs_u = std::max(st.max_abs_u, r.u.cwiseAbs().maxCoeff()); }
    if (i + 1 < trace.size()) {
      const double dt = trace[i + 1].t - r.t;
      if (r.u.size() == r.u_ref.size()) { st.deviation_integral += (r.u - r.u_ref).squaredNorm() * dt; }
      st.param_rate_integral += r.v.squaredNorm() * dt;
      if (r.slack) { st.slack_integral += *r.slack * *r.slack * dt; }
    }
  }
  return st;
}

inline nlohmann::json to_json(const TraceStats & st)
{
  auto finite_or_null = [](double v) -> nlohmann::json {
    if (std::isfinite(v)) { return v; }
    return nullptr;
  };
  nlohmann::json j;
  j["schema"] = 1;
  j["records"] = st.records;
  j["t_final"] = st.t_final;
  j["min_phi"] = finite_or_null(st.min_phi);
  j["min_rho"] = finite_or_null(st.min_rho);
  j["min_clearance"] = finite_or_null(st.min_clearance);
  j["max_abs_u"] = st.max_abs_u;
  j["cost"] = {{"deviation", st.deviation_integral}, {"param_rate", st.param_rate_integral}, {"slack", st.slack_integral}};
  j["min_phi_each"] = st.min_phi_each;
  j["min_rho_each"] = st.min_rho_each;
  return j;
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_double(double v)
{
  if (std::isnan(v)) { return "nan"; }
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> csv_header(const TraceRecord & r)
{
  std::vector<std::string> h{"t"};
  auto add = [&](const char * p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) { h.push_back(p + std::to_string(i)); }
  };
  add("x", r.x.size());
  add("k", r.k.size());
  add("uref", r.u_ref.size());
  add("u", r.u.size());
  add("v", r.v.size());
  add("phi", r.phi.size());
  add("rho", r.rho.size());
  for (const char * s : {"clearance", "qp_iters", "qp_status", "slack"}) { h.emplace_back(s); }
  return h;
}

/// One row per record; floats with 17 significant digits.
inline void write_csv(std::ostream & os, const std::vector<TraceRecord> & trace)
{
  if (trace.empty()) { throw EmptyTrace(); }
  const auto header = csv_header(trace.front());
  for (std::size_t i = 0; i < header.size(); ++i) { os << (i ? "," : "") << header[i]; }
  os << "\n";
  for (const auto & r : trace) {
    os << format_double(r.t);
    for (const Vec * v : {&r.x, &r.k, &r.u_ref, &r.u, &r.v, &r.phi, &r.rho}) {
      for (Eigen::Index i = 0; i < v->size(); ++i) { os << "," << format_double((*v)(i)); }
    }
    os << "," << format_double(r.clearance) << "," << r.qp_iterations << "," << to_string(r.qp_status) << ","
       << format_double(r.slack ? *r.slack : std::numeric_limits<double>::quiet_NaN()) << "\n";
  }
}

/// Parsed CSV trace: column names and numeric rows (qp_status stored as 0/1/2).
struct CsvTrace
{
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int column(const std::string & name) const
  {
    for (std::size_t i = 0; i < columns.size(); ++i) {
      if (columns[i] == name) { return static_cast<int>(i); }
    }
    return -1;
  }

  /// Indices of columns named prefix0, prefix1, ...
  std::vector<int> series(const std::string & prefix) const
  {
    std::vector<int> out;
    for (int i = 0;; ++i) {
      const int c = column(prefix + std::to_string(i));
      if (c < 0) { break; }
      out.push_back(c);
    }
    return out;
  }
};

inline CsvTrace read_csv(std::istream & is)
{
  CsvTrace tr;
  std::string line;
  if (!std::getline(is, line) || line.empty()) { throw MalformedTrace("missing CSV header"); }
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) { tr.columns.push_back(cell); }
  }
  if (tr.column("t") != 0) { throw MalformedTrace("first column must be t"); }
  const int status_col = tr.column("qp_status");
  while (std::getline(is, line)) {
    if (line.empty()) { continue; }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    int c = 0;
    while (std::getline(ss, cell, ',')) {
      if (c == status_col) {
        row.push_back(cell == "Optimal" ? 0.0 : cell == "Infeasible" ? 1.0 : 2.0);
      } else {
        try {
          std::size_t used = 0;
          row.push_back(cell == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(cell, &used));
        } catch (const std::exception &) {
          throw MalformedTrace("bad numeric cell '" + cell + "'");
        }
      }
      ++c;
    }
    if (row.size() != tr.columns.size()) { throw MalformedTrace("row has wrong number of cells"); }
    tr.rows.push_back(std::move(row));
  }
  if (tr.rows.empty()) { throw MalformedTrace("trace has no rows"); }
  return tr;
}

}  // namespace pcbf
