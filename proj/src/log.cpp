#include "moralscope/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace moralscope::log {

namespace {
std::atomic<Level> g_level{Level::kWarn};
std::mutex g_mutex;

const char* name_of(Level l) {
  switch (l) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarn: return "warn";
    case Level::kError: return "error";
    case Level::kOff: return "off";
  }
  return "?";
}
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void event(Level lvl, std::string_view name, nlohmann::json fields) {
  if (lvl < g_level.load()) return;
  nlohmann::json j = {{"level", name_of(lvl)}, {"event", std::string(name)}};
  if (fields.is_object()) {
    for (auto& [k, v] : fields.items()) j[k] = v;
  }
  std::lock_guard lock(g_mutex);
  std::cerr << j.dump() << '\n';
}

}  // namespace moralscope::log
