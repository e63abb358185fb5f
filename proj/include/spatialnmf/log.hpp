#pragma once

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

namespace spatialnmf::log {

enum class Level { quiet = 0, warn = 1, info = 2, debug = 3 };

/// Verbosity comes from the SPATIALNMF_LOG environment variable
/// (quiet|warn|info|debug); default is warn.
inline Level level() {
    static const Level lvl = [] {
        const char* env = std::getenv("SPATIALNMF_LOG");
        if (env == nullptr) return Level::warn;
        if (std::strcmp(env, "quiet") == 0) return Level::quiet;
        if (std::strcmp(env, "info") == 0) return Level::info;
        if (std::strcmp(env, "debug") == 0) return Level::debug;
        return Level::warn;
    }();
    return lvl;
}

inline void emit(Level at, const char* tag, const std::string& msg) {
    if (level() >= at) {
        std::fprintf(stderr, "[%s] %s\n", tag, msg.c_str());
    }
}

inline void warn(const std::string& msg) { emit(Level::warn, "warn", msg); }
inline void info(const std::string& msg) { emit(Level::info, "info", msg); }
inline void debug(const std::string& msg) { emit(Level::debug, "debug", msg); }

}  // namespace spatialnmf::log
