#pragma once

#include <stdexcept>
#include <string>

namespace wipin {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A processing call received zero frames, rows or vectors.
class EmptyInput : public Error {
public:
    using Error::Error;
};

/// Malformed file content. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class InvalidInput : public Error {
public:
    using Error::Error;
};

class InvalidSpec : public Error {
public:
    using Error::Error;
};

class InvalidLabels : public Error {
public:
    using Error::Error;
};

class InsufficientData : public Error {
public:
    using Error::Error;
};

class DegenerateModel : public Error {
public:
    using Error::Error;
};

class CohortError : public Error {
public:
    using Error::Error;
};

/// Requested user volume, window or session cut lies outside what the data allows.
class InvalidRange : public Error {
public:
    using Error::Error;
};

} // namespace wipin
