#pragma once

#include <stdexcept>
#include <string>

namespace absopf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. `field` is a JSON path such as
/// `buses[3].vm_min`; `line` is 1-based, or 0 when only the path is known.
class ParseError : public Error {
 public:
  ParseError(std::string field, int line, const std::string& message)
      : Error(format(field, line, message)), field_(std::move(field)), line_(line) {}

  const std::string& field() const noexcept { return field_; }
  int line() const noexcept { return line_; }

 private:
  static std::string format(const std::string& field, int line, const std::string& message) {
    std::string out = "parse error";
    if (!field.empty()) out += " at '" + field + "'";
    if (line > 0) out += " (line " + std::to_string(line) + ")";
    return out + ": " + message;
  }

  std::string field_;
  int line_;
};

/// A well-formed object that violates a domain invariant.
class ValidationError : public Error {
 public:
  ValidationError(std::string element, const std::string& message)
      : Error("validation error in " + element + ": " + message), element_(std::move(element)) {}

  const std::string& element() const noexcept { return element_; }

 private:
  std::string element_;
};

class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, std::size_t expected, std::size_t got)
      : Error(what + ": expected dimension " + std::to_string(expected) + ", got " +
              std::to_string(got)) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace absopf
