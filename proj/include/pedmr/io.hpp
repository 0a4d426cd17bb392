#pragma once

// Locale-independent number formatting and CSV helpers.

#include "pedmr/error.hpp"

#include <charconv>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace pedmr::io {

/// Shortest representation that round-trips; identical on every run.
inline std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s)
{
    const auto* ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline std::optional<double> parse_double(std::string_view s)
{
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::vector<std::string_view> split(std::string_view line, char sep)
{
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        out.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Numeric CSV table. A first row that does not parse as numbers is taken
/// as the header; blank lines and '#' comments are skipped.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
};

inline Table read_csv(std::istream& in)
{
    Table t;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string_view v = trim(line);
        if (line_no == 1 && v.starts_with("\xEF\xBB\xBF")) v = trim(v.substr(3));
        if (v.empty() || v.front() == '#') continue;
        const auto cells = split(v, ',');
        std::vector<double> row;
        bool numeric = true;
        for (auto c : cells) {
            const auto d = parse_double(c);
            if (!d) {
                numeric = false;
                break;
            }
            row.push_back(*d);
        }
        if (!numeric) {
            if (t.header.empty() && t.rows.empty()) {
                for (auto c : cells) t.header.emplace_back(c);
                continue;
            }
            throw ConfigError("csv line " + std::to_string(line_no) + ": non-numeric cell");
        }
        if (!t.rows.empty() && row.size() != t.rows.front().size()) {
            throw ConfigError("csv line " + std::to_string(line_no) + ": inconsistent column count");
        }
        t.rows.push_back(std::move(row));
    }
    return t;
}

} // namespace pedmr::io
