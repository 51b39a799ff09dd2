#pragma once

#include <stdexcept>
#include <string>

namespace restfuse {

enum class ErrorKind {
  validation,  // bad input data or configuration
  format,      // wrong magic / version / malformed file
  length,      // truncated payload or too-short signal
  range,       // window outside recording bounds
  parameter,   // invalid numeric parameter
  shape,       // tensor shape mismatch
  state,       // operation called in the wrong state
  io,          // filesystem failure
  numerical,   // non-finite loss or similar abort
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::format: return "format";
    case ErrorKind::length: return "length";
    case ErrorKind::range: return "range";
    case ErrorKind::parameter: return "parameter";
    case ErrorKind::shape: return "shape";
    case ErrorKind::state: return "state";
    case ErrorKind::io: return "io";
    case ErrorKind::numerical: return "numerical";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + " error: " + what), kind_(kind), message_(what) {}

  ErrorKind kind() const noexcept { return kind_; }
  // Message without the kind prefix.
  const std::string& message() const noexcept { return message_; }

  // CLI exit code: 3 for numerical aborts, 2 for everything the user can fix.
  int exit_code() const noexcept { return kind_ == ErrorKind::numerical ? 3 : 2; }

 private:
  ErrorKind kind_;
  std::string message_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

// Re-throws an Error with a pipeline stage tag prepended to its message.
template <typename Fn>
decltype(auto) with_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), "[" + stage + "] " + e.message());
  }
}

}  // namespace restfuse
