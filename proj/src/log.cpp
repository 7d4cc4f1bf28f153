#include "debtlens/log.hpp"

#include <cstdlib>
#include <mutex>
#include <string>

#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

namespace debtlens::log {

namespace {

std::shared_ptr<spdlog::logger> logger() {
  static std::once_flag once;
  static std::shared_ptr<spdlog::logger> instance;
  std::call_once(once, [] {
    instance = spdlog::stderr_color_mt("debtlens");
    instance->set_pattern("[%l] %v");
    auto level = spdlog::level::warn;
    if (const char* env = std::getenv("DEBTLENS_LOG"); env && *env) {
      level = spdlog::level::from_str(env);
      // from_str maps unknown names to off; keep the default instead.
      if (level == spdlog::level::off && std::string(env) != "off") level = spdlog::level::warn;
    }
    instance->set_level(level);
  });
  return instance;
}

}  // namespace

void init() { logger(); }

void debug(std::string_view m) { logger()->debug(m); }
void info(std::string_view m) { logger()->info(m); }
void warn(std::string_view m) { logger()->warn(m); }
void error(std::string_view m) { logger()->error(m); }

}  // namespace debtlens::log
