#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "tradenet/core/error.hpp"

namespace tradenet::text {

/// Shortest decimal form that parses back to the identical double.
inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) fail(ErrorKind::value, "could not format number");
    return std::string(buf, ptr);
}

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(s.substr(start));
            return parts;
        }
        parts.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

inline bool parse_double(std::string_view s, double& out) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

template <typename Int>
inline bool parse_int(std::string_view s, Int& out) {
    s = trim(s);
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size() && !s.empty();
}

inline double to_double(std::string_view s, const std::string& what) {
    double v;
    if (!parse_double(s, v)) fail(ErrorKind::parse, "cannot parse " + what + " from '" + std::string(s) + "'");
    return v;
}

template <typename Int>
inline Int to_int(std::string_view s, const std::string& what) {
    Int v;
    if (!parse_int(s, v)) fail(ErrorKind::parse, "cannot parse " + what + " from '" + std::string(s) + "'");
    return v;
}

}  // namespace tradenet::text
