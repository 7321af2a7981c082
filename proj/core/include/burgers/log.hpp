#pragma once

#include <functional>
#include <string_view>

namespace burgers {

using LogSink = std::function<void(std::string_view level, std::string_view message)>;

/// Replaces the process-wide sink (default: std::clog). Pass nullptr to silence.
void set_log_sink(LogSink sink);
void log_warning(std::string_view message);
void log_info(std::string_view message);

} // namespace burgers
