#pragma once

#include <charconv>
#include <stdexcept>
#include <string>

namespace pemc {

/// Shortest representation that parses back to the same double.
inline std::string formatDouble(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline double parseDouble(const std::string& tok) {
    double v = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
        throw std::runtime_error("bad number '" + tok + "'");
    return v;
}

}  // namespace pemc
