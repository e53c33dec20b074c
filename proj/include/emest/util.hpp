#ifndef EMEST_UTIL_HPP
#define EMEST_UTIL_HPP

#include <charconv>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>

namespace emest {

// ceil(alpha * n) computed robustly: alpha*n can land a hair above an exact
// integer in floating point (e.g. 0.1 * 10), which would push a plain ceil to
// the wrong bucket. The nudge is far below any honest fractional part.
inline long ceil_count(double alpha, long n) {
    double scaled = alpha * static_cast<double>(n);
    return static_cast<long>(std::ceil(scaled - 1e-9));
}

// Shortest round-trip decimal rendering of a double (via std::to_chars), so
// e.g. 0.3 prints as "0.3" while still parsing back bit-exactly.
inline std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, const std::string& context) {
    double value = 0.0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw std::runtime_error(context + ": cannot parse '" + std::string(text) +
                                 "' as a number");
    }
    return value;
}

inline long parse_long(std::string_view text, const std::string& context) {
    long value = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw std::runtime_error(context + ": cannot parse '" + std::string(text) +
                                 "' as an integer");
    }
    return value;
}

inline std::uint64_t parse_u64(std::string_view text, const std::string& context) {
    std::uint64_t value = 0;
    auto res = std::from_chars(text.data(), text.data() + text.size(), value);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
        throw std::runtime_error(context + ": cannot parse '" + std::string(text) +
                                 "' as an unsigned integer");
    }
    return value;
}

} // namespace emest

#endif
