#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace prisel {

// Precondition violated by caller-supplied data.
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Malformed file content; carries the 1-based line when known.
class ParseError : public std::runtime_error {
public:
  ParseError(const std::string& what, std::optional<std::size_t> line = std::nullopt)
      : std::runtime_error(line ? what + " (line " + std::to_string(*line) + ")" : what),
        base_(what),
        line_(line) {}

  std::optional<std::size_t> line() const noexcept { return line_; }
  // Message without the line suffix.
  const std::string& base_message() const noexcept { return base_; }

private:
  std::string base_;
  std::optional<std::size_t> line_;
};

// File could not be opened, read or written.
class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace prisel
