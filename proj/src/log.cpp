#include "advexp/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace advexp::log {

namespace {
std::atomic<Level> g_level{Level::kWarn};
std::mutex g_mu;
constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void write(Level lvl, std::string_view message) {
  if (lvl < g_level.load() || lvl == Level::kOff) return;
  std::lock_guard lock(g_mu);
  std::clog << "[advexp " << kNames[static_cast<int>(lvl)] << "] " << message << '\n';
}

}  // namespace advexp::log
