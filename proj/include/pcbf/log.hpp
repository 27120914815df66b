#pragma once

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <memory>
#include <string>

namespace pcbf {

/// Library logger on stderr; level from PCBF_LOG in {error, info, debug} (default info).
inline spdlog::logger & log()
{
  static std::shared_ptr<spdlog::logger> instance = [] {
    auto l = spdlog::stderr_color_mt("pcbf");
    l->set_pattern("[%l] %v");
    const char * env = std::getenv("PCBF_LOG");
    const std::string level = env ? env : "info";
    if (level == "debug") {
      l->set_level(spdlog::level::debug);
    } else if (level == "error") {
      l->set_level(spdlog::level::err);
    } else {
      l->set_level(spdlog::level::info);
    }
    return l;
  }();
  return *instance;
}

}  // namespace pcbf
