#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmax {

// Malformed input file; line numbers are 1-based.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string &msg, std::size_t line)
      : std::runtime_error(msg + " (line " + std::to_string(line) + ")"),
        line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

class OutOfRangeError : public std::runtime_error {
public:
  explicit OutOfRangeError(const std::string &msg) : std::runtime_error(msg) {}
};

class InvalidParameterError : public std::runtime_error {
public:
  explicit InvalidParameterError(const std::string &msg)
      : std::runtime_error(msg) {}
};

} // namespace cmax
