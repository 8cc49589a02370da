#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <string>

namespace fcg {

// Shortest text that parses back to the same double.
inline std::string format_number(double x) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

// Half-up rounding to `decimals` places. The epsilon keeps values such as
// 129.05 (stored as 129.04999...) rounding up.
inline double round_half_up(double x, int decimals) {
    const double scale = std::pow(10.0, decimals);
    return std::floor(x * scale + 0.5 + 1e-9) / scale;
}

inline std::string format_fixed(double x, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, round_half_up(x, decimals));
    return buf;
}

}  // namespace fcg
