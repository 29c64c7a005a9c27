#include "capnet/log.hpp"

#include <atomic>
#include <cstdlib>
#include <iostream>
#include <mutex>
#include <string>

namespace capnet::log {

namespace {

Level from_env() {
  const char* v = std::getenv("CAPNET_LOG");
  if (v == nullptr) return Level::kInfo;
  const std::string s(v);
  if (s == "error") return Level::kError;
  if (s == "warn") return Level::kWarn;
  if (s == "debug") return Level::kDebug;
  return Level::kInfo;
}

std::atomic<int>& current() {
  static std::atomic<int> level{static_cast<int>(from_env())};
  return level;
}

constexpr std::string_view kNames[] = {"error", "warn", "info", "debug"};

}  // namespace

Level threshold() { return static_cast<Level>(current().load()); }

void set_threshold(Level level) { current().store(static_cast<int>(level)); }

void write(Level level, std::string_view message) {
  if (static_cast<int>(level) > current().load()) return;
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::cerr << "[capnet " << kNames[static_cast<int>(level)] << "] " << message << '\n';
}

}  // namespace capnet::log
