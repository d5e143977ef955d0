#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace cqa {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Syntax error while parsing an expression. `offset` is a byte offset into
// the source string, or npos when no location is available.
struct ParseError : Error {
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t offset;
    ParseError(const std::string& msg, std::size_t off)
        : Error(msg + (off == npos ? std::string{}
                                   : " (at offset " + std::to_string(off) + ")")),
          offset(off) {}
};

// Evaluation hit a point outside the domain of some node (log of a
// nonpositive value, division by zero, abs at zero during differentiation...).
struct DomainError : Error {
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
    std::size_t offset;
    DomainError(const std::string& msg, std::size_t off)
        : Error(msg + (off == npos ? std::string{}
                                   : " (expression offset " + std::to_string(off) + ")")),
          offset(off) {}
};

// A document or system failed structural validation.
struct ValidationError : Error {
    using Error::Error;
};

// A file could not be read, written, or decoded at the byte/JSON level.
struct IoError : Error {
    using Error::Error;
};

// A numerical routine could not complete (rank collapse, iteration cap...).
struct NumericalError : Error {
    using Error::Error;
};

// A point required to be feasible is not; carries the violated labels.
struct FeasibilityError : Error {
    std::vector<int> violated;
    FeasibilityError(const std::string& msg, std::vector<int> v)
        : Error(msg), violated(std::move(v)) {}
};

}  // namespace cqa
