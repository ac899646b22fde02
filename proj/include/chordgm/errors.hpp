#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chordgm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed graph construction or an invalid assignment.
class GraphError : public Error {
public:
    using Error::Error;
};

/// A model, matrix or program violating its documented invariants.
class ModelError : public Error {
public:
    using Error::Error;
};

/// Text input that could not be parsed. Line and column are 1-based; 0 means unknown.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column = 0)
        : Error(format(what, line, column)), line_(line), column_(column) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    static std::string format(const std::string& what, std::size_t line, std::size_t column) {
        if (line == 0) return what;
        std::string where = "line " + std::to_string(line);
        if (column != 0) where += ", column " + std::to_string(column);
        return where + ": " + what;
    }

    std::size_t line_;
    std::size_t column_;
};

/// Exact inference refused because an intermediate table would be too large.
class GuardError : public Error {
public:
    GuardError(const std::string& what, std::size_t required_width)
        : Error(what), required_width_(required_width) {}

    std::size_t required_width() const noexcept { return required_width_; }

private:
    std::size_t required_width_;
};

/// Every full assignment has probability zero.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

} // namespace chordgm
