#pragma once

#include <sstream>
#include <string_view>

namespace semaforge {

enum class LogLevel { debug, info, warn, error };

/// Writes one line to the shared stderr logger. Machine outputs never go here.
void log_line(LogLevel level, std::string_view message);
void set_log_level(LogLevel level);

// libtorch bundles its own fmt, so formatting stays out of this header.
template <typename... Args>
void log(LogLevel level, const Args&... args) {
  std::ostringstream os;
  (os << ... << args);
  log_line(level, os.str());
}

template <typename... Args>
void log_info(const Args&... args) { log(LogLevel::info, args...); }
template <typename... Args>
void log_warn(const Args&... args) { log(LogLevel::warn, args...); }

}  // namespace semaforge
