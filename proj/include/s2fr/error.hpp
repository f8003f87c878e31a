#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace s2fr {

// Every failure surfaced by the library carries one of these categories. The
// category name is also the stable prefix of the message ("shape: ...").
enum class ErrorKind { Config, Io, Shape, Numeric };

constexpr std::string_view error_prefix(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::Config: return "config";
        case ErrorKind::Io: return "io";
        case ErrorKind::Shape: return "shape";
        case ErrorKind::Numeric: return "numeric";
    }
    return "error";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_prefix(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
    if (!condition) fail(kind, message);
}

}  // namespace s2fr
