#pragma once

#include <cstdlib>
#include <iostream>
#include <string>

namespace fpk {
namespace log {

enum class Level { Error = 0, Warn = 1, Info = 2, Debug = 3 };

inline Level threshold() {
    static Level lvl = [] {
        const char* env = std::getenv("FPK_CERTIFY_LOG");
        if (!env) return Level::Warn;
        std::string s(env);
        if (s == "error") return Level::Error;
        if (s == "warn") return Level::Warn;
        if (s == "info") return Level::Info;
        if (s == "debug") return Level::Debug;
        return Level::Warn;
    }();
    return lvl;
}

inline void message(Level lvl, const std::string& msg) {
    if (lvl > threshold()) return;
    static const char* names[] = {"error", "warn", "info", "debug"};
    std::cerr << "[fpk_certify][" << names[static_cast<int>(lvl)] << "] " << msg << "\n";
}

inline void info(const std::string& msg) { message(Level::Info, msg); }
inline void warn(const std::string& msg) { message(Level::Warn, msg); }
inline void error(const std::string& msg) { message(Level::Error, msg); }

} // namespace log
} // namespace fpk
