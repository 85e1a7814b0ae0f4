#pragma once

#include <json.hpp>

#include <string_view>

namespace moralscope::log {

enum class Level { kDebug = 0, kInfo = 1, kWarn = 2, kError = 3, kOff = 4 };

void set_level(Level level);
Level level();

/// One JSON object per line on stderr: {"level", "event", ...fields}.
void event(Level level, std::string_view name, nlohmann::json fields = nlohmann::json::object());

inline void info(std::string_view name, nlohmann::json fields = nlohmann::json::object()) {
  event(Level::kInfo, name, std::move(fields));
}
inline void warn(std::string_view name, nlohmann::json fields = nlohmann::json::object()) {
  event(Level::kWarn, name, std::move(fields));
}

}  // namespace moralscope::log
