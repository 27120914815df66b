#pragma once

#include <atomic>
#include <chrono>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <stop_token>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pcbf/filter.hpp"
#include "pcbf/log.hpp"
#include "pcbf/scenarios/config.hpp"
#include "pcbf/scenarios/rover.hpp"
#include "pcbf/sim.hpp"
#include "pcbf/teleop/protocol.hpp"

namespace pcbf::teleop {

using Clock = std::chrono::steady_clock;

/// Latest-value mailbox: writers overwrite, the loop reads the newest value.
template<class T>
class Mailbox
{
public:
  void put(T value)
  {
    std::lock_guard lock(mu_);
    value_ = std::move(value);
  }

  std::optional<T> get() const
  {
    std::lock_guard lock(mu_);
    return value_;
  }

  std::optional<T> take()
  {
    std::lock_guard lock(mu_);
    return std::exchange(value_, std::nullopt);
  }

  void clear() { take(); }

private:
  mutable std::mutex mu_;
  std::optional<T> value_;
};

struct StampedUref
{
  double ax = 0.0;
  double steer = 0.0;
  Clock::time_point stamp;
};

/// Immutable description of the current obstacle field.
struct Scene
{
  std::uint64_t epoch = 0;
  std::vector<rover::Obstacle> obstacles;
  rover::Constants constants;
};

inline ScenarioConfig rover_config(std::uint64_t seed = 0)
{
  ScenarioConfig c;
  c.scenario = "rover";
  c.seed = seed;
  return c;
}

struct TeleopOptions
{
  ScenarioConfig scenario = rover_config();
  double stale_after = 0.5;
  double snapshot_hz = 30.0;
};

/**
 * The simulation loop. Only the thread calling step() / run_realtime()
 * touches x, k, the filter and the trace; other threads talk to it through
 * submit_uref, request_reset and the snapshot sink.
 */
class TeleopCore
{
public:
  using Sink = std::function<void(std::shared_ptr<const std::string>)>;

  explicit TeleopCore(TeleopOptions opt, Sink sink = {}) : opt_(std::move(opt)), sink_(std::move(sink))
  {
    opt_.scenario.validate();
    if (opt_.scenario.scenario != "rover") { throw ConfigError("teleop serves the rover scenario only"); }
    sim_ = opt_.scenario.sim();
    load(opt_.scenario.seed);
  }

  void set_sink(Sink sink) { sink_ = std::move(sink); }

  void submit_uref(double ax, double steer, Clock::time_point now) { uref_.put({clip_unit(ax), clip_unit(steer), now}); }
  void clear_uref() { uref_.clear(); }
  void request_reset(std::uint64_t seed) { reset_.put(seed); }

  /// One control period at wall-clock time `now`.
  void step(Clock::time_point now)
  {
    if (auto seed = reset_.take()) { apply_reset(*seed); }
    if (fault_) { return; }

    Vec u_ref = Vec::Zero(2);
    if (const auto m = uref_.get(); m && now - m->stamp <= std::chrono::duration<double>(opt_.stale_after)) {
      u_ref << m->ax, m->steer;
    }
    try {
      const FilterOutput out = filter_->step(x_, k_, t_, u_ref);
      ControlAction act;
      act.u_ref = u_ref;
      act.u = out.u;
      act.v = out.v;
      act.qp_iterations = out.qp.iterations;
      act.qp_status = out.qp.status;
      trace_.push_back(make_record(*scenario_, x_, k_, t_, std::move(act)));
      maybe_publish();
      advance(scenario_->dynamics(), x_, k_, trace_.back().u, trace_.back().v, sim_);
      t_ += sim_.dt_ctrl;
      ++steps_;
      published_t_.store(t_);
    } catch (const std::exception & e) {
      fault_ = e.what();
      log().error("teleop loop frozen at t={:.3f}: {}", t_, e.what());
      publish_fault();
    }
  }

  /// Steps at 1 / dt_ctrl in wall-clock time until stop is requested.
  void run_realtime(std::stop_token stop)
  {
    const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(sim_.dt_ctrl));
    auto deadline = Clock::now();
    while (!stop.stop_requested()) {
      deadline += period;
      step(Clock::now());
      ++ticks_;
      if (Clock::now() > deadline) {
        ++misses_;
      } else {
        std::this_thread::sleep_until(deadline);
      }
    }
  }

  double sim_time() const { return published_t_.load(); }
  std::uint64_t ticks() const { return ticks_.load(); }
  std::uint64_t deadline_misses() const { return misses_.load(); }
  double deadline_miss_rate() const
  {
    const auto n = ticks_.load();
    return n ? static_cast<double>(misses_.load()) / static_cast<double>(n) : 0.0;
  }

  std::shared_ptr<const Scene> scene() const
  {
    std::lock_guard lock(scene_mu_);
    return scene_;
  }

  // The accessors below belong to the loop thread, or to anyone once the loop has stopped.
  const std::vector<TraceRecord> & trace() const { return trace_; }
  const std::optional<std::string> & fault() const { return fault_; }
  const Vec & state() const { return x_; }
  const Vec & parameter() const { return k_; }

  void write_trace(const std::string & path) const
  {
    std::ofstream os(path);
    if (!os) { throw Error("cannot write '" + path + "'"); }
    if (trace_.empty()) { return; }
    write_csv(os, trace_);
  }

private:
  void load(std::uint64_t seed)
  {
    const rover::Constants c = rover_constants(opt_.scenario);
    auto obstacles = rover::sample_obstacles(seed, c);
    scenario_ = std::make_unique<rover::RoverScenario>(obstacles, c);
    filter_ = std::make_unique<SafetyFilter>(scenario_->pcbf().as_hopcbf(), scenario_->dynamics(), scenario_->input(),
                                             scenario_->params(), scenario_->filter_config());
    x_ = scenario_->initial_state();
    k_ = scenario_->initial_parameter();
    auto next = std::make_shared<Scene>();
    next->obstacles = std::move(obstacles);
    next->constants = c;
    {
      std::lock_guard lock(scene_mu_);
      next->epoch = scene_ ? scene_->epoch + 1 : 0;
      scene_ = std::move(next);
    }
    send_obstacles_ = true;
    next_snapshot_t_ = t_;
  }

  void apply_reset(std::uint64_t seed)
  {
    try {
      load(seed);
      fault_.reset();
      log().info("teleop reset with seed {}", seed);
    } catch (const std::exception & e) {
      fault_ = std::string("reset failed: ") + e.what();
      publish_fault();
    }
  }

  Snapshot snapshot_of(const TraceRecord & r) const
  {
    Snapshot s;
    s.t = r.t;
    s.x = r.x;
    s.k = r.k;
    s.u_ref = r.u_ref;
    s.u_applied = r.u;
    s.v = r.v;
    s.h = r.phi(0);
    s.rho = r.rho;
    s.clearance = r.clearance;
    s.intervening = intervening(r.u, r.u_ref);
    s.epoch = scene()->epoch;
    s.deadline_miss_rate = deadline_miss_rate();
    return s;
  }

  void emit(Snapshot s)
  {
    if (!sink_) { return; }
    nlohmann::json j = to_json(s);
    if (send_obstacles_) {
      j["obstacles"] = obstacles_to_json(scene()->obstacles);
      send_obstacles_ = false;
    }
    sink_(std::make_shared<const std::string>(serialize(j)));
  }

  void maybe_publish()
  {
    if (t_ + 1e-9 < next_snapshot_t_) { return; }
    next_snapshot_t_ = t_ + 1.0 / opt_.snapshot_hz;
    emit(snapshot_of(trace_.back()));
  }

  void publish_fault()
  {
    Snapshot s = trace_.empty() ? Snapshot{} : snapshot_of(trace_.back());
    if (trace_.empty()) {
      s.t = t_;
      s.x = x_;
      s.k = k_;
    }
    s.fault = fault_;
    emit(std::move(s));
  }

  TeleopOptions opt_;
  Sink sink_;
  SimConfig sim_;
  Mailbox<StampedUref> uref_;
  Mailbox<std::uint64_t> reset_;

  std::unique_ptr<rover::RoverScenario> scenario_;
  std::unique_ptr<SafetyFilter> filter_;
  Vec x_, k_;
  double t_ = 0.0;
  double next_snapshot_t_ = 0.0;
  bool send_obstacles_ = true;
  std::uint64_t steps_ = 0;
  std::vector<TraceRecord> trace_;
  std::optional<std::string> fault_;

  mutable std::mutex scene_mu_;
  std::shared_ptr<const Scene> scene_;
  std::atomic<double> published_t_{0.0};
  std::atomic<std::uint64_t> ticks_{0};
  std::atomic<std::uint64_t> misses_{0};
};

/**
 * Session bookkeeping and message handling, independent of the transport.
 * Thread-safe; at most one session holds the driver role.
 */
class Hub
{
public:
  explicit Hub(TeleopCore & core) : core_(core) {}

  std::string open_session()
  {
    std::lock_guard lock(mu_);
    const std::string id = "s" + std::to_string(++counter_);
    roles_[id] = Role::Observer;
    return id;
  }

  void close_session(const std::string & id)
  {
    std::lock_guard lock(mu_);
    roles_.erase(id);
    if (driver_ == id) {
      driver_.clear();
      core_.clear_uref();
    }
  }

  std::optional<Role> role(const std::string & id) const
  {
    std::lock_guard lock(mu_);
    const auto it = roles_.find(id);
    return it == roles_.end() ? std::nullopt : std::optional<Role>(it->second);
  }

  /// Replies addressed to this session only.
  std::vector<std::string> handle(const std::string & id, const std::string & text, Clock::time_point now = Clock::now())
  {
    std::lock_guard lock(mu_);
    if (!roles_.contains(id)) { return {error_message("unknown_session")}; }
    const ClientMessage msg = parse_client_message(text);
    if (const auto * bad = std::get_if<BadMessage>(&msg)) { return {error_message("bad_message", bad->detail)}; }
    if (const auto * hello = std::get_if<Hello>(&msg)) { return {greet(id, hello->role)}; }
    if (driver_ != id) { return {error_message("not_driver")}; }
    if (const auto * u = std::get_if<UrefMessage>(&msg)) {
      core_.submit_uref(u->ax, u->steer, now);
      return {};
    }
    core_.request_reset(std::get<ResetMessage>(msg).seed);
    return {};
  }

private:
  std::string greet(const std::string & id, Role wanted)
  {
    bool rejected = false;
    if (wanted == Role::Driver) {
      if (driver_.empty() || driver_ == id) {
        driver_ = id;
      } else {
        wanted = Role::Observer;
        rejected = true;
      }
    } else if (driver_ == id) {
      driver_.clear();
      core_.clear_uref();
    }
    roles_[id] = wanted;
    const auto scene = core_.scene();
    return welcome_message(wanted, id, scene->obstacles, scene->constants, scene->epoch, rejected);
  }

  TeleopCore & core_;
  mutable std::mutex mu_;
  std::unordered_map<std::string, Role> roles_;
  std::string driver_;
  std::uint64_t counter_ = 0;
};

}  // namespace pcbf::teleop
