#pragma once

#include <stdexcept>
#include <string>

namespace fsh {

/// Error category; the CLI maps each category onto a stable exit code.
enum class ErrorKind {
  validation,   // bad input: files, schemas, preconditions
  computation,  // numerical or algorithmic failure on valid input
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_validation(const std::string& what) {
  throw Error(ErrorKind::validation, what);
}

[[noreturn]] inline void fail_computation(const std::string& what) {
  throw Error(ErrorKind::computation, what);
}

inline const char* to_string(ErrorKind kind) {
  return kind == ErrorKind::validation ? "validation" : "computation";
}

}  // namespace fsh
