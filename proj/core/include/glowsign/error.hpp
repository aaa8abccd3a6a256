#pragma once

#include <stdexcept>
#include <string>

namespace glowsign {

// Error categories; the CLI maps each category to a distinct exit code.
enum class ErrorKind {
    invalid_input,
    unsupported_shape,
    placement,
    stage_dependency,
    io,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct InvalidInputError : Error {
    explicit InvalidInputError(const std::string& msg) : Error(ErrorKind::invalid_input, msg) {}
};

struct UnsupportedShapeError : Error {
    explicit UnsupportedShapeError(const std::string& msg) : Error(ErrorKind::unsupported_shape, msg) {}
};

struct PlacementError : Error {
    explicit PlacementError(const std::string& msg) : Error(ErrorKind::placement, msg) {}
};

struct StageDependencyError : Error {
    explicit StageDependencyError(const std::string& msg) : Error(ErrorKind::stage_dependency, msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(ErrorKind::io, msg) {}
};

inline int exit_code(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_input: return 2;
    case ErrorKind::unsupported_shape: return 3;
    case ErrorKind::placement: return 4;
    case ErrorKind::stage_dependency: return 5;
    case ErrorKind::io: return 6;
    }
    return 1;
}

}  // namespace glowsign
