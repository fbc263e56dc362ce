#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace transdet {

// Exception classes that the CLI maps onto distinct exit codes.

/// Invalid configuration value; the message names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A required input file (checkpoint, scene set, ...) is absent or unreadable.
class MissingInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A data file could not be parsed. `line()` is 1-based, 0 when unknown.
class MalformedDataError : public std::runtime_error {
 public:
  MalformedDataError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnknownExperimentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace transdet
