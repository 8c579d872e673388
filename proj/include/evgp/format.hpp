#pragma once

#include <cmath>
#include <cstdio>
#include <string>

namespace evgp {

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Decimal string for a positive value given as a natural log; stays printable
// far past the double overflow point (log-space DP values at huge beta).
inline std::string format_positive_from_log(double log_value) {
    if (std::isinf(log_value) && log_value < 0) return "0";
    const double e10 = log_value / std::log(10.0);
    if (std::abs(e10) < 15.0) return format_double(std::exp(log_value));
    const double ex = std::floor(e10);
    const double mant = std::pow(10.0, e10 - ex);
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.12fe%+d", mant, static_cast<int>(ex));
    return buf;
}

}  // namespace evgp
