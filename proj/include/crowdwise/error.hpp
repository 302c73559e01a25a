#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crowdwise {

/// Failure categories. Each one maps onto a fixed process exit status.
enum class ErrorKind {
    usage,       ///< bad command line
    input,       ///< invalid or malformed input data
    io,          ///< file could not be read or written
    degenerate,  ///< numerically degenerate input (zero variance, zero range)
    generation,  ///< synthetic draw rejected with truncation disabled
    capacity,    ///< combinatorial guard exceeded
};

[[nodiscard]] constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::usage: return "usage";
        case ErrorKind::input: return "input";
        case ErrorKind::io: return "io";
        case ErrorKind::degenerate: return "degenerate";
        case ErrorKind::generation: return "generation";
        case ErrorKind::capacity: return "capacity";
    }
    return "unknown";
}

/// 0 success, 2 usage, 3 input/parse (and I/O), 4 numeric/degenerate, 5 capacity.
[[nodiscard]] constexpr int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::usage: return 2;
        case ErrorKind::input:
        case ErrorKind::io: return 3;
        case ErrorKind::degenerate:
        case ErrorKind::generation: return 4;
        case ErrorKind::capacity: return 5;
    }
    return 1;
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace crowdwise
