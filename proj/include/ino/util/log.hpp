#pragma once

#include <atomic>
#include <iostream>
#include <string_view>

namespace ino {

enum class LogLevel { debug = 0, info = 1, warning = 2, silent = 3 };

inline std::atomic<LogLevel>& log_level() {
    static std::atomic<LogLevel> level{LogLevel::info};
    return level;
}

inline void log(LogLevel level, std::string_view msg) {
    if (level < log_level().load()) return;
    static constexpr const char* tags[] = {"debug", "info", "warning"};
    std::clog << "[ino:" << tags[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void log_warning(std::string_view msg) { log(LogLevel::warning, msg); }
inline void log_info(std::string_view msg) { log(LogLevel::info, msg); }

}  // namespace ino
