#include <cstdio>

#include "pcbf/scenarios/runner.hpp"

// Runs the three front-vehicle profiles and prints the closest approach of each.
int main()
{
  for (int profile = 1; profile <= 3; ++profile) {
    pcbf::ScenarioConfig cfg;
    cfg.scenario = "acc";
    cfg.profile = profile;
    const pcbf::RunOutcome res = pcbf::run_acc(cfg);
    std::printf("profile %d: min gap %.4f, final x1 %.4f, final speed %.4f, min phi %.3e, min rho %.3e%s\n", profile,
                res.extra["min_gap"].get<double>(), res.extra["final_x1"].get<double>(), res.extra["final_speed"].get<double>(),
                res.stats.min_phi, res.stats.min_rho, res.fault ? " (fault)" : "");
  }
}
