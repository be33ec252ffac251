#pragma once

#include <cstdarg>

namespace lsdat {

enum class LogLevel { Error = 0, Warn = 1, Info = 2, Debug = 3 };

// Level comes from the LSDAT_LOG environment variable
// (error|warn|info|debug), default warn. Messages go to stderr.
LogLevel log_level();
void set_log_level(LogLevel level);

void log_message(LogLevel level, const char* fmt, ...);

#define LSDAT_LOG_ERROR(...) ::lsdat::log_message(::lsdat::LogLevel::Error, __VA_ARGS__)
#define LSDAT_LOG_WARN(...) ::lsdat::log_message(::lsdat::LogLevel::Warn, __VA_ARGS__)
#define LSDAT_LOG_INFO(...) ::lsdat::log_message(::lsdat::LogLevel::Info, __VA_ARGS__)
#define LSDAT_LOG_DEBUG(...) ::lsdat::log_message(::lsdat::LogLevel::Debug, __VA_ARGS__)

}  // namespace lsdat
