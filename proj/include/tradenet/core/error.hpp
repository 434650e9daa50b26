#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tradenet {

/// Coarse error category. The CLI prints it as the machine-parseable prefix
/// of its one-line error message.
enum class ErrorKind { shape, value, numeric, io, parse, data, config, arch, state };

inline std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::shape: return "shape";
        case ErrorKind::value: return "value";
        case ErrorKind::numeric: return "numeric";
        case ErrorKind::io: return "io";
        case ErrorKind::parse: return "parse";
        case ErrorKind::data: return "data";
        case ErrorKind::config: return "config";
        case ErrorKind::arch: return "arch";
        case ErrorKind::state: return "state";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace tradenet
