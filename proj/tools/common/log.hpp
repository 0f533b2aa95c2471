#pragma once

#include <atomic>
#include <iostream>
#include <mutex>
#include <stdexcept>
#include <string>
#include <string_view>

namespace polard::log {

enum class Level { debug = 0, info = 1, warn = 2, error = 3, off = 4 };

inline std::atomic<Level>& threshold() {
  static std::atomic<Level> level{Level::info};
  return level;
}

inline Level parse_level(std::string_view name) {
  if (name == "debug" || name == "trace") return Level::debug;
  if (name == "info") return Level::info;
  if (name == "warn" || name == "warning") return Level::warn;
  if (name == "error") return Level::error;
  if (name == "off" || name == "quiet") return Level::off;
  throw std::invalid_argument("unknown log level '" + std::string(name) + "'");
}

inline void write(Level level, std::string_view msg) {
  if (level < threshold().load()) return;
  static std::mutex m;
  static constexpr const char* names[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(m);
  std::clog << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

inline void debug(std::string_view msg) { write(Level::debug, msg); }
inline void info(std::string_view msg) { write(Level::info, msg); }
inline void warn(std::string_view msg) { write(Level::warn, msg); }
inline void error(std::string_view msg) { write(Level::error, msg); }

}  // namespace polard::log
