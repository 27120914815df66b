#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "pcbf/plot.hpp"
#include "pcbf/scenarios/runner.hpp"
#include "pcbf/suites.hpp"
#include "pcbf/teleop/server.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_usage = 2;

int fail(int code, const std::string & kind, const std::string & message)
{
  std::cerr << nlohmann::json{{"error", kind}, {"message", message}}.dump() << "\n";
  return code;
}

struct RunFlags
{
  std::string scenario;
  std::optional<int> profile;
  std::optional<std::uint64_t> seed;
  std::optional<double> t_final;
  std::optional<double> dt_ctrl;
  std::string config;
};

void add_run_flags(CLI::App * app, RunFlags & f)
{
  app->add_option("--scenario", f.scenario, "acc, rover or linear");
  app->add_option("--profile", f.profile, "acc front-vehicle profile (1, 2 or 3)");
  app->add_option("--seed", f.seed, "obstacle / sampling seed");
  app->add_option("--t-final", f.t_final, "horizon in seconds");
  app->add_option("--dt-ctrl", f.dt_ctrl, "control period in seconds");
  app->add_option("--config", f.config, "JSON scenario config; flags override its fields");
}

/// Config file first, then explicit flags on top.
pcbf::ScenarioConfig resolve(const RunFlags & f)
{
  pcbf::ScenarioConfig c;
  if (!f.config.empty()) { c = pcbf::load_config(f.config, true); }
  if (!f.scenario.empty()) { c.scenario = f.scenario; }
  if (f.profile) { c.profile = *f.profile; }
  if (f.seed) { c.seed = *f.seed; }
  if (f.t_final) { c.t_final = f.t_final; }
  if (f.dt_ctrl) { c.dt_ctrl = f.dt_ctrl; }
  if (c.scenario.empty()) { throw pcbf::ConfigError("no scenario given"); }
  c.validate();
  return c;
}

void write_file(const fs::path & path, const std::string & content)
{
  std::ofstream os(path, std::ios::binary);
  if (!os) { throw pcbf::Error("cannot write " + path.string()); }
  os << content;
}

int cmd_run(const RunFlags & flags, const std::string & out_dir)
{
  const pcbf::ScenarioConfig cfg = resolve(flags);
  const pcbf::RunOutcome res = pcbf::run_scenario(cfg);
  fs::create_directories(out_dir);
  {
    std::ofstream os(fs::path(out_dir) / "trace.csv");
    pcbf::write_csv(os, res.trace);
  }
  write_file(fs::path(out_dir) / "stats.json", res.stats_json().dump(2) + "\n");
  write_file(fs::path(out_dir) / "scene.json", res.scene.dump(2) + "\n");

  if (res.fault) { return fail(exit_failure, "safety_fault", *res.fault); }
  if (!res.safe()) {
    return fail(exit_failure, "safety_violation",
                "min_phi " + std::to_string(res.stats.min_phi) + ", min_rho " + std::to_string(res.stats.min_rho));
  }
  std::cout << res.stats_json().dump() << "\n";
  return exit_ok;
}

int cmd_plot(const std::string & trace_path, std::string scene_path, std::string scenario, const std::string & out_dir)
{
  std::ifstream is(trace_path);
  if (!is) { throw pcbf::MalformedTrace("cannot open " + trace_path); }
  const pcbf::CsvTrace tr = pcbf::read_csv(is);
  if (scene_path.empty()) { scene_path = (fs::path(trace_path).parent_path() / "scene.json").string(); }
  nlohmann::json scene = nlohmann::json::object();
  if (std::ifstream ss(scene_path); ss) {
    scene = nlohmann::json::parse(ss, nullptr, false);
    if (scene.is_discarded()) { throw pcbf::ConfigError("scene file is not valid JSON"); }
  }
  if (scenario.empty()) { scenario = scene.value("scenario", ""); }
  if (scenario.empty()) { throw pcbf::ConfigError("scenario unknown: pass --scenario or a scene.json"); }
  fs::create_directories(out_dir);
  for (const auto & [name, svg] : pcbf::plot::render(scenario, tr, scene)) {
    write_file(fs::path(out_dir) / name, svg);
    std::cout << (fs::path(out_dir) / name).string() << "\n";
  }
  return exit_ok;
}

int cmd_validate(const std::vector<std::string> & suites, std::uint64_t seed, const std::string & sabotage)
{
  pcbf::suites::Options opt;
  opt.seed = seed;
  if (sabotage == "gradient") {
    opt.sabotage = pcbf::suites::Sabotage::Gradient;
  } else if (!sabotage.empty()) {
    throw pcbf::ConfigError("unknown sabotage '" + sabotage + "'");
  }
  bool all = true;
  for (const auto & r : pcbf::suites::run(suites, opt)) {
    std::cout << fmt::format("{:<14} {}  ({:.2f} s)\n", r.suite, r.pass() ? "PASS" : "FAIL", r.seconds);
    for (const auto & c : r.checks) {
      std::cout << fmt::format("  {:<4} {:<52} {:>12.4e} {} {:.1e}\n", c.pass ? "ok" : "FAIL", c.name, c.value, c.relation,
                               c.threshold);
    }
    all = all && r.pass();
  }
  return all ? exit_ok : exit_failure;
}

std::atomic<bool> g_stop{false};

int cmd_teleop(const RunFlags & flags, const std::string & bind, const std::string & out_dir, double duration)
{
  RunFlags f = flags;
  if (f.scenario.empty()) { f.scenario = "rover"; }
  pcbf::teleop::TeleopOptions opt;
  opt.scenario = resolve(f);
  pcbf::teleop::Server server(opt, bind);
  server.start();
  pcbf::log().info("teleop listening on {} (port {})", bind, server.port());
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  const auto start = pcbf::teleop::Clock::now();
  while (!g_stop) {
    if (duration > 0.0 && pcbf::teleop::Clock::now() - start >= std::chrono::duration<double>(duration)) { break; }
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  server.stop();
  fs::create_directories(out_dir);
  server.core().write_trace((fs::path(out_dir) / "trace.csv").string());
  const auto & core = server.core();
  nlohmann::json stats = core.trace().empty() ? nlohmann::json::object() : pcbf::to_json(pcbf::trace_stats(core.trace()));
  stats["ticks"] = core.ticks();
  stats["deadline_misses"] = core.deadline_misses();
  stats["deadline_miss_rate"] = core.deadline_miss_rate();
  write_file(fs::path(out_dir) / "stats.json", stats.dump(2) + "\n");
  std::cout << stats.dump() << "\n";
  return exit_ok;
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Parametrized control barrier function filters: scenarios, plots, validation, teleoperation"};
  app.require_subcommand(1);

  RunFlags run_flags;
  std::string out_dir = "out";
  auto * run = app.add_subcommand("run", "simulate a scenario and write trace.csv, stats.json, scene.json");
  add_run_flags(run, run_flags);
  run->add_option("--out", out_dir, "output directory");

  std::string trace_path, scene_path, plot_scenario, plot_out = "out";
  auto * plot = app.add_subcommand("plot", "render SVG figures from a trace");
  plot->add_option("trace", trace_path, "trace.csv")->required();
  plot->add_option("--scene", scene_path, "scene.json (default: next to the trace)");
  plot->add_option("--scenario", plot_scenario, "override the scenario named in scene.json");
  plot->add_option("--out", plot_out, "output directory");

  std::vector<std::string> suites;
  std::uint64_t validate_seed = 1;
  std::string sabotage;
  auto * validate = app.add_subcommand("validate", "run the validation suites");
  validate->add_option("--suite", suites, "suite to run (repeatable; default all)");
  validate->add_option("--seed", validate_seed, "sampling seed");
  validate->add_option("--sabotage", sabotage, "test fixture: 'gradient' flips one gradient sign")->group("");

  RunFlags teleop_flags;
  std::string bind = "127.0.0.1:8900", teleop_out = "out";
  double duration = 0.0;
  auto * teleop = app.add_subcommand("teleop", "serve the rover live over a websocket");
  add_run_flags(teleop, teleop_flags);
  teleop->add_option("--bind", bind, "host:port");
  teleop->add_option("--out", teleop_out, "directory for trace.csv on shutdown");
  teleop->add_option("--duration", duration, "stop after this many seconds (0: run until SIGINT)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError & e) {
    return app.exit(e) == 0 ? exit_ok : exit_usage;
  }

  try {
    if (*run) { return cmd_run(run_flags, out_dir); }
    if (*plot) { return cmd_plot(trace_path, scene_path, plot_scenario, plot_out); }
    if (*validate) { return cmd_validate(suites, validate_seed, sabotage); }
    return cmd_teleop(teleop_flags, bind, teleop_out, duration);
  } catch (const pcbf::ConfigError & e) {
    return fail(exit_usage, "config", e.what());
  } catch (const pcbf::InvalidArgument & e) {
    return fail(exit_usage, "invalid_argument", e.what());
  } catch (const pcbf::MalformedTrace & e) {
    return fail(exit_usage, "malformed_trace", e.what());
  } catch (const std::exception & e) {
    return fail(exit_failure, "error", e.what());
  }
}
