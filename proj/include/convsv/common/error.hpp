#pragma once

#include <stdexcept>
#include <string>

namespace convsv {

enum class ErrorKind {
  kParse,
  kValidation,
  kDuplicate,
  kEmpty,
  kUnsatisfiable,
  kNonFinite,
  kMissing,
  kMismatch,
  kIo,
};

const char* to_string(ErrorKind kind);

// Every library failure is reported through this type. `line()` is the
// 1-based input line for parse errors and 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message, std::size_t line = 0)
      : std::runtime_error(message), kind_(kind), line_(line) {}

  ErrorKind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ErrorKind kind_;
  std::size_t line_;
};

}  // namespace convsv
