#pragma once

#include <string_view>

namespace debtlens::log {

/// Configures the stderr logger from DEBTLENS_LOG (trace, debug, info, warn,
/// error, off; default warn). Safe to call more than once.
void init();

void debug(std::string_view message);
void info(std::string_view message);
void warn(std::string_view message);
void error(std::string_view message);

}  // namespace debtlens::log
