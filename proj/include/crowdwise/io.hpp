#pragma once

// Estimate files and output plumbing.
//
// Estimate-file format: plain text, one estimate per line. Blank lines and
// lines starting with '#' are ignored. An optional header line
// `truth=<value>` may precede the first estimate.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "crowdwise/error.hpp"

namespace crowdwise::io {

struct EstimateFile {
    std::vector<double> values;
    std::optional<double> truth;
};

/// Shortest decimal form that parses back to the same double.
[[nodiscard]] inline std::string format_double(double v) {
    char buf[64];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) fail(ErrorKind::io, "number formatting failed");
    return {buf, end};
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

inline std::optional<double> parse_number(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

}  // namespace detail

[[nodiscard]] inline EstimateFile parse_estimates(std::istream& in, const std::string& name = "<input>") {
    EstimateFile file;
    std::string line;
    std::size_t lineno = 0;
    auto error = [&](const std::string& what) {
        fail(ErrorKind::input, name + ":" + std::to_string(lineno) + ": " + what);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto text = detail::trim(line);
        if (text.empty() || text.front() == '#') continue;
        if (text.starts_with("truth=")) {
            if (!file.values.empty()) error("truth header must precede the estimates");
            if (file.truth) error("duplicate truth header");
            const auto v = detail::parse_number(detail::trim(text.substr(6)));
            if (!v || !(*v > 0.0)) error("truth must be a positive number");
            file.truth = v;
            continue;
        }
        const auto v = detail::parse_number(text);
        if (!v) error("not a number: '" + std::string(text) + "'");
        if (!(*v > 0.0)) error("estimate must be positive, got " + std::string(text));
        file.values.push_back(*v);
    }
    if (file.values.empty()) fail(ErrorKind::input, name + ": no estimates found");
    return file;
}

[[nodiscard]] inline EstimateFile read_estimates(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    return parse_estimates(in, path.string());
}

[[nodiscard]] inline std::string format_estimates(std::span<const double> values, std::optional<double> truth) {
    std::string out;
    if (truth) out += "truth=" + format_double(*truth) + "\n";
    for (double v : values) out += format_double(v) + "\n";
    return out;
}

/// Writes every (path, content) pair or none of them: contents go to
/// temporary siblings first and are renamed into place once all succeeded.
inline void write_files(const std::vector<std::pair<std::filesystem::path, std::string>>& files) {
    std::vector<std::filesystem::path> temps;
    auto cleanup = [&] {
        std::error_code ec;
        for (const auto& t : temps) std::filesystem::remove(t, ec);
    };
    for (const auto& [path, content] : files) {
        auto tmp = path;
        tmp += ".partial";
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (out) temps.push_back(tmp);
        if (out) out << content;
        if (!out || !out.flush()) {
            cleanup();
            fail(ErrorKind::io, "cannot write " + path.string());
        }
    }
    for (const auto& [path, content] : files) {
        std::error_code ec;
        if (std::filesystem::is_directory(path, ec)) {
            cleanup();
            fail(ErrorKind::io, "cannot write " + path.string() + ": is a directory");
        }
    }
    for (std::size_t i = 0; i < files.size(); ++i) {
        std::error_code ec;
        std::filesystem::rename(temps[i], files[i].first, ec);
        if (ec) {
            const std::string reason = ec.message();
            // Withdraw the files already moved into place so the run leaves nothing behind.
            for (std::size_t j = 0; j < i; ++j) std::filesystem::remove(files[j].first, ec);
            cleanup();
            fail(ErrorKind::io, "cannot write " + files[i].first.string() + ": " + reason);
        }
    }
}

}  // namespace crowdwise::io
