#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rcp {

// Bad arguments or violated preconditions. Maps to CLI exit code 1.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Malformed input file. Carries the 1-based line number of the offending row.
class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line, const std::string& source = "")
      : InputError((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) + ": " +
                   what),
        line_(line),
        reason_(what) {}

  std::size_t line() const noexcept { return line_; }
  const std::string& reason() const noexcept { return reason_; }

 private:
  std::size_t line_;
  std::string reason_;
};

// A model that cannot be used (singular P, zero noisy marginal, ...). Exit code 2.
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Classifier or regression fit failed numerically. Exit code 2.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

}  // namespace detail
}  // namespace rcp
