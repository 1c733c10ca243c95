#ifndef COLLOC_ERRORS_HPP
#define COLLOC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace colloc {

// Base class for everything this library throws on purpose.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad input: files, flags, config invariants, out-of-domain arguments.
class ValidationError : public Error {
public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Structurally valid input that yields nothing to compute on
// (no overlap, zero valid rows, no co-populated cells).
class EmptyResultError : public Error {
public:
  explicit EmptyResultError(const std::string& msg) : Error(msg) {}
};

// Numerically degenerate input: constant regressor, zero variance, zero range.
class DegenerateInputError : public Error {
public:
  explicit DegenerateInputError(const std::string& msg) : Error(msg) {}
};

} // namespace colloc

#endif
