#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <utility>

namespace verbatim::log {

enum class Level { debug, info, warn, error };

using Sink = std::function<void(Level, const std::string&)>;

namespace detail {
inline std::mutex& sink_mutex()
{
    static std::mutex m;
    return m;
}
inline Sink& sink()
{
    static Sink s = [](Level level, const std::string& msg) {
        if (level == Level::debug) {
            return;
        }
        static const char* names[] = {"debug", "info", "warn", "error"};
        std::cerr << "[" << names[static_cast<int>(level)] << "] " << msg << '\n';
    };
    return s;
}
}  // namespace detail

/// Replaces the process-wide sink and returns the previous one.
inline Sink set_sink(Sink s)
{
    std::lock_guard lock(detail::sink_mutex());
    return std::exchange(detail::sink(), std::move(s));
}

inline void write(Level level, const std::string& msg)
{
    std::lock_guard lock(detail::sink_mutex());
    if (detail::sink()) {
        detail::sink()(level, msg);
    }
}

inline void debug(const std::string& msg) { write(Level::debug, msg); }
inline void info(const std::string& msg) { write(Level::info, msg); }
inline void warn(const std::string& msg) { write(Level::warn, msg); }
inline void error(const std::string& msg) { write(Level::error, msg); }

/// Installs a sink for the lifetime of the object, restoring the old one after.
class ScopedSink {
  public:
    explicit ScopedSink(Sink s) : m_prev(set_sink(std::move(s))) {}
    ~ScopedSink() { set_sink(std::move(m_prev)); }
    ScopedSink(const ScopedSink&) = delete;
    ScopedSink& operator=(const ScopedSink&) = delete;

  private:
    Sink m_prev;
};

}  // namespace verbatim::log
