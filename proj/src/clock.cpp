#include "decert/clock.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

namespace decert {

Clock system_clock() {
    return [] {
        return std::chrono::duration_cast<std::chrono::seconds>(
                   std::chrono::system_clock::now().time_since_epoch())
            .count();
    };
}

Clock fixed_clock(int64_t at) {
    return [at] { return at; };
}

std::optional<int64_t> parse_rfc3339(std::string_view text) {
    std::tm tm{};
    int year = 0, month = 0, day = 0, hour = 0, minute = 0, second = 0;
    char zone = 0;
    if (std::sscanf(std::string(text).c_str(), "%d-%d-%dT%d:%d:%d%c", &year, &month, &day, &hour,
                    &minute, &second, &zone) != 7 ||
        (zone != 'Z' && zone != 'z'))
        return std::nullopt;
    tm.tm_year = year - 1900;
    tm.tm_mon = month - 1;
    tm.tm_mday = day;
    tm.tm_hour = hour;
    tm.tm_min = minute;
    tm.tm_sec = second;
    time_t at = timegm(&tm);
    if (at == static_cast<time_t>(-1)) return std::nullopt;
    return static_cast<int64_t>(at);
}

std::string format_rfc3339(int64_t at) {
    std::tm tm{};
    time_t t = static_cast<time_t>(at);
    gmtime_r(&t, &tm);
    char buf[80];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

}  // namespace decert
