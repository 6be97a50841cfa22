#pragma once

#include "pnewton/core.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace pnewton {

class TraceFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kTraceHeader =
    "t,r,F,dist,alpha,mu,step_norm,inner_iters,subres,unit_step";

namespace detail {

inline void put_double(std::string& out, double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);  // shortest round-trip form
    out.append(buf, res.ptr);
}

inline void put_opt(std::string& out, const std::optional<double>& v) {
    if (v) put_double(out, *v);
}

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

inline double parse_double(std::string_view s, std::size_t line_no, const char* col) {
    double v = 0.0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw TraceFormatError("line " + std::to_string(line_no) + ": bad number in column " + col);
    return v;
}

inline int parse_int(std::string_view s, std::size_t line_no, const char* col) {
    int v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw TraceFormatError("line " + std::to_string(line_no) + ": bad integer in column " + col);
    return v;
}

inline std::optional<double> parse_opt(std::string_view s, std::size_t line_no, const char* col) {
    if (s.empty()) return std::nullopt;
    return parse_double(s, line_no, col);
}

}  // namespace detail

inline std::string format_trace_csv(const IterateTrace& trace) {
    std::string out(kTraceHeader);
    out += '\n';
    for (const auto& row : trace.rows) {
        out += std::to_string(row.t);
        out += ',';
        detail::put_double(out, row.r);
        out += ',';
        detail::put_opt(out, row.F);
        out += ',';
        detail::put_opt(out, row.dist);
        out += ',';
        detail::put_opt(out, row.alpha);
        out += ',';
        detail::put_opt(out, row.mu);
        out += ',';
        detail::put_opt(out, row.step_norm);
        out += ',';
        if (row.inner_iters) out += std::to_string(*row.inner_iters);
        out += ',';
        detail::put_opt(out, row.subres);
        out += ',';
        if (row.unit_step) out += *row.unit_step ? "1" : "0";
        out += '\n';
    }
    return out;
}

inline void write_trace_csv(const IterateTrace& trace, const std::string& path) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    os << format_trace_csv(trace);
    if (!os) throw std::runtime_error("failed writing '" + path + "'");
}

/// Strict parser: header must match, every line needs all ten fields and a
/// trailing newline, and t must increase strictly.
inline IterateTrace parse_trace_csv(std::string_view text) {
    IterateTrace trace;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool header_seen = false;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos)
            throw TraceFormatError("line " + std::to_string(line_no + 1) + ": missing line terminator (truncated file?)");
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!header_seen) {
            if (line != kTraceHeader) throw TraceFormatError("unexpected CSV header");
            header_seen = true;
            continue;
        }
        auto f = detail::split_csv(line);
        if (f.size() != 10)
            throw TraceFormatError("line " + std::to_string(line_no) + ": expected 10 fields, got " +
                                   std::to_string(f.size()));
        TraceRow row;
        row.t = detail::parse_int(f[0], line_no, "t");
        row.r = detail::parse_double(f[1], line_no, "r");
        row.F = detail::parse_opt(f[2], line_no, "F");
        row.dist = detail::parse_opt(f[3], line_no, "dist");
        row.alpha = detail::parse_opt(f[4], line_no, "alpha");
        row.mu = detail::parse_opt(f[5], line_no, "mu");
        row.step_norm = detail::parse_opt(f[6], line_no, "step_norm");
        if (!f[7].empty()) row.inner_iters = detail::parse_int(f[7], line_no, "inner_iters");
        row.subres = detail::parse_opt(f[8], line_no, "subres");
        if (!f[9].empty()) {
            if (f[9] != "0" && f[9] != "1")
                throw TraceFormatError("line " + std::to_string(line_no) + ": unit_step must be 0 or 1");
            row.unit_step = f[9] == "1";
        }
        if (!trace.rows.empty() && row.t <= trace.rows.back().t)
            throw TraceFormatError("line " + std::to_string(line_no) + ": t must increase strictly");
        trace.rows.push_back(row);
    }
    if (!header_seen) throw TraceFormatError("empty trace file");
    return trace;
}

inline IterateTrace read_trace_csv(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw TraceFormatError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << is.rdbuf();
    return parse_trace_csv(ss.str());
}

}  // namespace pnewton
