#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace esm {

/// An iterative routine (Newton, Lanczos, ...) stopped without reaching its
/// tolerance; carries the final residual so callers can report it.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// Grammar or config text could not be parsed; position is the 0-based
/// offset of the offending character in the input.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t position)
      : std::runtime_error(what), position_(position) {}
  std::size_t position() const { return position_; }

 private:
  std::size_t position_;
};

/// Malformed or corrupted file contents (datasets, model files).
class FormatError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Closed-form spectrum requested for a graph that has none.
class UnsupportedStructure : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace esm
