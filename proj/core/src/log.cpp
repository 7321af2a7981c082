#include "burgers/log.hpp"

#include <iostream>
#include <mutex>

namespace burgers {

namespace {

std::mutex& sink_mutex() {
    static std::mutex m;
    return m;
}

LogSink& sink() {
    static LogSink s = [](std::string_view level, std::string_view message) {
        std::clog << "[" << level << "] " << message << '\n';
    };
    return s;
}

void emit(std::string_view level, std::string_view message) {
    std::lock_guard<std::mutex> lock(sink_mutex());
    if (sink()) sink()(level, message);
}

} // namespace

void set_log_sink(LogSink s) {
    std::lock_guard<std::mutex> lock(sink_mutex());
    sink() = std::move(s);
}

void log_warning(std::string_view message) { emit("warn", message); }
void log_info(std::string_view message) { emit("info", message); }

} // namespace burgers
