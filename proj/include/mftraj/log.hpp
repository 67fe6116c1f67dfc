#pragma once

#include <string_view>

namespace mftraj {

enum class LogLevel { error = 0, info = 1, debug = 2 };

/// "error", "info" or "debug"; anything else is a ConfigError.
LogLevel parse_log_level(std::string_view value);
std::string_view to_string(LogLevel level);

/// Reads MFTRAJ_LOG (error, info or debug; default info). An unknown value
/// is a ConfigError.
LogLevel log_level_from_env();

void set_log_level(LogLevel level);
LogLevel log_level();

/// Writes one line to stderr when `level` is enabled.
void log(LogLevel level, std::string_view message);

inline void log_error(std::string_view m) { log(LogLevel::error, m); }
inline void log_info(std::string_view m) { log(LogLevel::info, m); }
inline void log_debug(std::string_view m) { log(LogLevel::debug, m); }

}  // namespace mftraj
