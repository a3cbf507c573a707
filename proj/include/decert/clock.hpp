#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>

namespace decert {

// UTC seconds since the Unix epoch; injectable so expiry tests never sleep.
using Clock = std::function<int64_t()>;

Clock system_clock();
Clock fixed_clock(int64_t at);

std::optional<int64_t> parse_rfc3339(std::string_view text);
std::string format_rfc3339(int64_t at);

}  // namespace decert
