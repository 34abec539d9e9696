#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"

namespace evcs::csv {

/// A parsed CSV file with a mandatory header row. No quoting support; the
/// files this project reads and writes are plain numeric tables.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        return -1;
    }

    int require_column(std::string_view name, std::string_view source) const {
        const int c = column(name);
        if (c < 0) {
            throw ConfigError(std::string(source) + ": missing column '" + std::string(name) + "'");
        }
        return c;
    }
};

inline std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r' || s[b] == '\n')) ++b;
    while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r' || s[e - 1] == '\n')) --e;
    return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

inline Table parse(std::istream& in, std::string_view source) {
    Table table;
    std::string line;
    bool have_header = false;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        auto fields = split(t);
        if (!have_header) {
            table.header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != table.header.size()) {
            throw ConfigError(std::string(source) + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(table.header.size()) + " fields, got " +
                              std::to_string(fields.size()));
        }
        table.rows.push_back(std::move(fields));
    }
    if (!have_header) throw ConfigError(std::string(source) + ": empty CSV");
    return table;
}

inline Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return parse(in, path);
}

inline double to_double(const std::string& field, std::string_view source) {
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
        throw ConfigError(std::string(source) + ": not a number: '" + field + "'");
    }
    return v;
}

inline long to_long(const std::string& field, std::string_view source) {
    long v = 0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || ptr != last) {
        throw ConfigError(std::string(source) + ": not an integer: '" + field + "'");
    }
    return v;
}

/// Shortest text that parses back to the identical double.
inline std::string fmt(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

/// Reads a `slot,<value_column>` series; slots must be 0..n-1 in order.
inline std::vector<double> read_series(const std::string& path, std::string_view value_column) {
    const auto table = read_file(path);
    const int cs = table.require_column("slot", path);
    const int cv = table.require_column(value_column, path);
    std::vector<double> out;
    out.reserve(table.rows.size());
    for (const auto& row : table.rows) {
        const long slot = to_long(row[cs], path);
        if (slot != static_cast<long>(out.size())) {
            throw ConfigError(path + ": slot " + std::to_string(slot) + " out of sequence");
        }
        out.push_back(to_double(row[cv], path));
    }
    return out;
}

} // namespace evcs::csv
