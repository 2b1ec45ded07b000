#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace n2n {

/// Base class for everything the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed file content. Carries the byte offset where parsing failed.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (at byte offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Operands whose dimensions do not agree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Parameter outside its documented domain.
class ParamError : public Error {
public:
    using Error::Error;
};

}  // namespace n2n
