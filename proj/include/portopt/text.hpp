#pragma once

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "portopt/errors.hpp"

namespace portopt {

/// Shortest decimal string that round-trips to the same double.
/// Locale independent, so file output is byte-stable across machines.
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

/// Strict double parse of a whole token. Throws ParseError on leftovers.
inline double parse_double(std::string_view tok, const std::string& what) {
    double v = 0.0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw ParseError(what + ": not a number: '" + std::string(tok) + "'");
    return v;
}

inline long parse_long(std::string_view tok, const std::string& what) {
    long v = 0;
    auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
        throw ParseError(what + ": not an integer: '" + std::string(tok) + "'");
    return v;
}

/// Splits one CSV line on commas. No quoting support; cells are trimmed.
inline std::vector<std::string> split_csv(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        std::size_t comma = line.find(',', start);
        std::string_view cell = (comma == std::string_view::npos)
                                    ? line.substr(start)
                                    : line.substr(start, comma - start);
        while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t' || cell.back() == '\r'))
            cell.remove_suffix(1);
        cells.emplace_back(cell);
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

} // namespace portopt
