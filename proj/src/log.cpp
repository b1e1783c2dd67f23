#include "semaforge/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace semaforge {

namespace {

spdlog::logger& logger() {
  static std::shared_ptr<spdlog::logger> l = [] {
    auto existing = spdlog::get("semaforge");
    if (!existing) existing = spdlog::stderr_color_mt("semaforge");
    existing->set_pattern("[%H:%M:%S] [%^%l%$] %v");
    return existing;
  }();
  return *l;
}

spdlog::level::level_enum to_spdlog(LogLevel level) {
  switch (level) {
    case LogLevel::debug: return spdlog::level::debug;
    case LogLevel::info: return spdlog::level::info;
    case LogLevel::warn: return spdlog::level::warn;
    case LogLevel::error: return spdlog::level::err;
  }
  return spdlog::level::info;
}

}  // namespace

void log_line(LogLevel level, std::string_view message) { logger().log(to_spdlog(level), "{}", message); }

void set_log_level(LogLevel level) { logger().set_level(to_spdlog(level)); }

}  // namespace semaforge
