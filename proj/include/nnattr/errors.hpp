#pragma once

#include <stdexcept>
#include <string>

namespace nnattr {

/// Shape or dimension mismatch between tensors/layers.
struct ShapeError : std::runtime_error {
    explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid value (bad parameter, division by zero, non-finite result).
struct ValueError : std::runtime_error {
    explicit ValueError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed model document or data file.
struct ParseError : std::runtime_error {
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// File could not be read or written.
struct IoError : std::runtime_error {
    explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

} // namespace nnattr
