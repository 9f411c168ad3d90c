#pragma once

#include <spdlog/spdlog.h>

#include <string_view>
#include <utility>

namespace eqk::log {

// Logger shared by the library and the CLI. Writes to stderr; the level comes
// from EQK_LOG (error, info, debug) and defaults to error.
spdlog::logger& logger();

// Overrides the level; accepts the same names as EQK_LOG. Throws InputError otherwise.
void set_level(std::string_view name);

template <class... Args>
void info(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().info(fmt, std::forward<Args>(args)...);
}

template <class... Args>
void debug(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().debug(fmt, std::forward<Args>(args)...);
}

template <class... Args>
void error(fmt::format_string<Args...> fmt, Args&&... args) {
  logger().error(fmt, std::forward<Args>(args)...);
}

}  // namespace eqk::log
