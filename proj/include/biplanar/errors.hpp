#pragma once

#include <stdexcept>
#include <string>

namespace biplanar {

// Argument outside the physical or geometric domain of an operation.
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Iterative or quadrature routine failed to reach its tolerance.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NoNullFound : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DegenerateTrap : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class InfeasibleError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t offset = 0)
        : std::runtime_error(what + " (line " + std::to_string(line) + ", offset " +
                             std::to_string(offset) + ")"),
          line_(line), offset_(offset) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t line_;
    std::size_t offset_;
};

}  // namespace biplanar
