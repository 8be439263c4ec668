#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace wsr {

/// Tensor dimensions that do not fit an operation.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Invalid operator parameter (negative stride, bad enum, ...).
class ParamError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Inconsistent or unsupported configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// API misuse, e.g. calling backward() on a non-scalar.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed binary file. Carries the byte offset where parsing failed.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Missing or unwritable files and directories.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Loss or metric turned NaN/Inf.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace wsr
