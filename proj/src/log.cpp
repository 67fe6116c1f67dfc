#include "mftraj/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

#include "mftraj/error.hpp"

namespace mftraj {

namespace {

std::atomic<LogLevel> current{LogLevel::info};
std::mutex sink;

}  // namespace

LogLevel parse_log_level(std::string_view value) {
  if (value == "error") return LogLevel::error;
  if (value == "info") return LogLevel::info;
  if (value == "debug") return LogLevel::debug;
  throw ConfigError("log level must be error, info or debug, got '" + std::string(value) + "'");
}

std::string_view to_string(LogLevel level) {
  static constexpr std::string_view names[] = {"error", "info", "debug"};
  return names[static_cast<int>(level)];
}

LogLevel log_level_from_env() {
  const char* raw = std::getenv("MFTRAJ_LOG");
  if (raw == nullptr || *raw == '\0') return LogLevel::info;
  try {
    return parse_log_level(raw);
  } catch (const ConfigError&) {
    throw ConfigError(std::string("MFTRAJ_LOG must be error, info or debug, got '") + raw + "'");
  }
}

void set_log_level(LogLevel level) { current = level; }
LogLevel log_level() { return current; }

void log(LogLevel level, std::string_view message) {
  if (static_cast<int>(level) > static_cast<int>(current.load())) return;
  std::lock_guard lock(sink);
  std::cerr << '[' << to_string(level) << "] " << message << '\n';
}

}  // namespace mftraj
