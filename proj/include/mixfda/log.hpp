#pragma once

#include <iostream>
#include <string_view>

namespace mixfda::log {

enum class Level { quiet = 0, warn = 1, info = 2 };

inline Level& level() {
  static Level lvl = Level::warn;
  return lvl;
}

inline void warn(std::string_view msg) {
  if (level() >= Level::warn) std::cerr << "[mixfda] warning: " << msg << '\n';
}

inline void info(std::string_view msg) {
  if (level() >= Level::info) std::cerr << "[mixfda] " << msg << '\n';
}

}  // namespace mixfda::log
