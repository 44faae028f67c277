#include "cura/log.hpp"

#include <atomic>
#include <iostream>
#include <mutex>

namespace cura::log {

namespace {
std::atomic<Level> g_level{Level::Info};
std::mutex g_mutex;
}  // namespace

void set_level(Level level) { g_level = level; }
Level level() { return g_level; }

void write(Level lvl, std::string_view message) {
  if (lvl < g_level.load()) return;
  static constexpr const char* kNames[] = {"debug", "info", "warn", "error"};
  std::lock_guard lock(g_mutex);
  std::cerr << "[cura " << kNames[static_cast<int>(lvl)] << "] " << message << '\n';
}

}  // namespace cura::log
