#include "eqk/log.hpp"

#include <spdlog/sinks/stdout_color_sinks.h>

#include <cstdlib>
#include <memory>
#include <string>

#include "eqk/error.hpp"

namespace eqk::log {

namespace {

spdlog::level::level_enum parse_level(std::string_view name) {
  if (name == "error") return spdlog::level::err;
  if (name == "info") return spdlog::level::info;
  if (name == "debug") return spdlog::level::debug;
  throw InputError("unknown log level '" + std::string(name) + "' (expected error, info or debug)");
}

std::shared_ptr<spdlog::logger> make_logger() {
  auto sink = std::make_shared<spdlog::sinks::stderr_color_sink_mt>();
  auto logger = std::make_shared<spdlog::logger>("eqk", sink);
  logger->set_pattern("[%l] %v");
  spdlog::level::level_enum level = spdlog::level::err;
  if (const char* env = std::getenv("EQK_LOG"); env && *env) {
    try {
      level = parse_level(env);
    } catch (const InputError&) {
      logger->warn("ignoring EQK_LOG={}", env);
    }
  }
  logger->set_level(level);
  return logger;
}

}  // namespace

spdlog::logger& logger() {
  static const std::shared_ptr<spdlog::logger> instance = make_logger();
  return *instance;
}

void set_level(std::string_view name) { logger().set_level(parse_level(name)); }

}  // namespace eqk::log
