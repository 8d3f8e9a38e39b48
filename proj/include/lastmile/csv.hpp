#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "lastmile/core.hpp"

namespace lastmile {

// ---------------------------------------------------------------------------
// Number formatting and parsing
// ---------------------------------------------------------------------------

// Shortest representation that round-trips the double exactly.  Every number
// written to an artifact goes through here, which keeps repeated runs
// byte-identical.
inline std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw InternalError("format_double: to_chars failed");
    return std::string(buf, ptr);
}

// Decimal rendering used in human-facing labels: integral values gain a
// trailing ".0" so bin edges always read as reals (e.g. "120.0").
inline std::string format_decimal(double v) {
    std::string s = format_double(v);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

inline std::string format_fixed(double v, int digits) {
    char buf[64];
    int n = std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    if (n < 0 || n >= static_cast<int>(sizeof buf))
        throw InternalError("format_fixed: snprintf failed");
    return std::string(buf, static_cast<std::size_t>(n));
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

// Strict full-string parse; returns nullopt for anything that is not a
// complete decimal number.
inline std::optional<double> try_parse_double(std::string_view raw) {
    std::string_view s = trim(raw);
    if (s.empty()) return std::nullopt;
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

inline std::optional<long long> try_parse_int(std::string_view raw) {
    std::string_view s = trim(raw);
    if (s.empty()) return std::nullopt;
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// CSV reader / writer
// ---------------------------------------------------------------------------

struct RawTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        return std::nullopt;
    }

    std::size_t require_column(std::string_view name) const {
        auto c = column(name);
        if (!c) throw MissingColumn(std::string(name));
        return *c;
    }
};

namespace detail {

// One record, honoring quoted fields ("" escapes a quote) and quoted
// newlines.  Returns false at end of input.
inline bool read_csv_record(std::istream& in, std::vector<std::string>& out) {
    out.clear();
    int c = in.get();
    if (c == EOF) return false;
    std::string field;
    bool quoted = false;
    while (true) {
        if (c == EOF) break;
        char ch = static_cast<char>(c);
        if (quoted) {
            if (ch == '"') {
                int peek = in.peek();
                if (peek == '"') {
                    field += '"';
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                field += ch;
            }
        } else if (ch == '"') {
            quoted = true;
        } else if (ch == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else if (ch == '\n') {
            break;
        } else if (ch == '\r') {
            // swallow \r\n; a bare \r also terminates the record
            if (in.peek() == '\n') in.get();
            break;
        } else {
            field += ch;
        }
        c = in.get();
    }
    out.push_back(std::move(field));
    return true;
}

inline bool needs_quoting(std::string_view s) {
    return s.find_first_of(",\"\n\r") != std::string_view::npos;
}

}  // namespace detail

inline RawTable read_csv(std::istream& in) {
    RawTable t;
    if (!detail::read_csv_record(in, t.header))
        throw DataError("empty CSV input: no header row");
    std::vector<std::string> rec;
    std::size_t line = 1;
    while (detail::read_csv_record(in, rec)) {
        ++line;
        if (rec.size() == 1 && rec[0].empty()) continue;  // blank line
        if (rec.size() != t.header.size())
            throw WidthMismatch("CSV row " + std::to_string(line) + " has " +
                                std::to_string(rec.size()) + " fields, header has " +
                                std::to_string(t.header.size()));
        t.rows.push_back(rec);
    }
    return t;
}

inline RawTable read_csv_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open file: " + path);
    return read_csv(in);
}

inline void write_csv_field(std::ostream& out, std::string_view s) {
    if (!detail::needs_quoting(s)) {
        out << s;
        return;
    }
    out << '"';
    for (char c : s) {
        if (c == '"') out << "\"\"";
        else out << c;
    }
    out << '"';
}

inline void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        write_csv_field(out, fields[i]);
    }
    out << '\n';
}

}  // namespace lastmile
