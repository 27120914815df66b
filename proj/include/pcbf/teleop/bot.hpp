#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "pcbf/random.hpp"
#include "pcbf/scenarios/rover.hpp"
#include "pcbf/scenarios/runner.hpp"
#include "pcbf/teleop/client.hpp"
#include "pcbf/teleop/core.hpp"

namespace pcbf::teleop {

struct BotReport
{
  int urefs_sent = 0;
  int snapshots = 0;
  int faults = 0;
  int errors = 0;
  bool got_driver = false;
};

/**
 * Connects as driver and replays the aggressive policy for `duration` of wall
 * time, sending a uref at `rate_hz` computed from the latest snapshot.
 */
inline BotReport run_aggressive_bot(const std::string & host, unsigned short port, std::chrono::duration<double> duration,
                                    double rate_hz = 50.0)
{
  BotReport rep;
  std::mutex mu;
  std::condition_variable cv;
  std::optional<std::vector<rover::Obstacle>> obstacles;
  std::optional<std::pair<double, Vec>> latest;

  WsClient client(host, port, [&](const std::string & text) {
    const auto j = nlohmann::json::parse(text, nullptr, false);
    if (!j.is_object() || !j.contains("type")) { return; }
    std::lock_guard lock(mu);
    const std::string type = j["type"].get<std::string>();
    if (type == "welcome") {
      rep.got_driver = j.value("role", "") == "driver";
      obstacles = obstacles_from_json(j.at("obstacles"));
    } else if (type == "snapshot" || type == "fault") {
      ++rep.snapshots;
      if (type == "fault") { ++rep.faults; }
      latest = std::make_pair(j.at("t").get<double>(), json_vec(j.at("x")));
    } else if (type == "error") {
      ++rep.errors;
    }
    cv.notify_all();
  });
  client.send(R"({"type":"hello","role":"driver"})");
  {
    std::unique_lock lock(mu);
    if (!cv.wait_for(lock, std::chrono::seconds(5), [&] { return obstacles && latest; })) {
      throw Error("bot: no welcome or snapshot from server");
    }
  }
  rover::AggressiveDriver driver(*obstacles);
  const auto period = std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(1.0 / rate_hz));
  const auto start = Clock::now();
  auto next = start;
  while (Clock::now() - start < duration) {
    std::pair<double, Vec> s;
    {
      std::lock_guard lock(mu);
      s = *latest;
    }
    const Vec u = driver(s.first, s.second);
    client.send(serialize(nlohmann::json{{"type", "uref"}, {"ax", u(0)}, {"steer", u(1)}}));
    ++rep.urefs_sent;
    next += period;
    std::this_thread::sleep_until(next);
  }
  client.close();
  std::lock_guard lock(mu);
  return rep;
}

/// A random protocol frame: valid, malformed, or hostile.
inline std::string fuzz_message(Rng & rng)
{
  auto pick = [&](int n) { return static_cast<int>(rng.next() % static_cast<std::uint64_t>(n)); };
  auto num = [&]() -> nlohmann::json {
    switch (pick(6)) {
      case 0: return rng.uniform(-1.0, 1.0);
      case 1: return rng.uniform(-1e6, 1e6);
      case 2: return 1e308;
      case 3: return -static_cast<std::int64_t>(rng.next() % 1000);
      case 4: return "0.5";
      default: return nullptr;
    }
  };
  switch (pick(12)) {
    case 0:
    case 1:
    case 2: return nlohmann::json{{"type", "uref"}, {"ax", rng.uniform(-3.0, 3.0)}, {"steer", rng.uniform(-3.0, 3.0)}}.dump();
    case 3: return nlohmann::json{{"type", "uref"}, {"ax", num()}, {"steer", num()}}.dump();
    case 4: return nlohmann::json{{"type", "hello"}, {"role", pick(2) ? "driver" : "observer"}}.dump();
    case 5: return nlohmann::json{{"type", "hello"}, {"role", num()}}.dump();
    case 6: return pick(50) == 0 ? nlohmann::json{{"type", "reset"}, {"seed", rng.next() % 100}}.dump()
                                 : nlohmann::json{{"type", "reset"}, {"seed", num()}}.dump();
    case 7: return nlohmann::json{{"type", num()}}.dump();
    case 8: {
      std::string s(static_cast<std::size_t>(pick(64)), ' ');
      for (auto & c : s) { c = static_cast<char>(0x20 + pick(0x5f)); }
      return s;
    }
    case 9: {
      const std::string valid = R"({"type":"uref","ax":0.3,"steer":-0.2})";
      return valid.substr(0, static_cast<std::size_t>(pick(static_cast<int>(valid.size()))));
    }
    case 10: return std::string(static_cast<std::size_t>(pick(200)), '[');
    default: return pick(2) ? "[]" : "{\"type\":\"uref\",\"ax\":NaN,\"steer\":1}";
  }
}

/// Sends `count` fuzz frames on one connection that first claims the driver role.
inline int run_fuzzer(const std::string & host, unsigned short port, int count, std::uint64_t seed)
{
  std::atomic<int> replies{0};
  WsClient client(host, port, [&](const std::string &) { ++replies; });
  client.send(R"({"type":"hello","role":"driver"})");
  Rng rng(seed);
  for (int i = 0; i < count; ++i) { client.send(fuzz_message(rng)); }
  client.close();
  return replies.load();
}

}  // namespace pcbf::teleop
