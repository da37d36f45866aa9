#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mgembed {

// Malformed or inconsistent input data (files, sequences, graphs).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A text input failed to parse; carries the 1-based line number.
class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Negative sampling could not find any non-neighbour for an anchor node.
class SaturationError : public DataError {
 public:
  using DataError::DataError;
};

// Training produced a non-finite value and was aborted.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mgembed
