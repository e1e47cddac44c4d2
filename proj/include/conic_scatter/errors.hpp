#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace conic_scatter {

enum class ErrorKind {
  invalid_input,
  degenerate,
  integration_failure,
  domain,
  trapped,
  accuracy,
  no_solution,
  numeric,
  coverage,
  spectral_leak,
  usage,
  io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::integration_failure: return "integration-failure";
    case ErrorKind::domain: return "domain";
    case ErrorKind::trapped: return "trapped-trajectory";
    case ErrorKind::accuracy: return "accuracy";
    case ErrorKind::no_solution: return "no-solution";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::coverage: return "coverage";
    case ErrorKind::spectral_leak: return "spectral-leak";
    case ErrorKind::usage: return "usage";
    case ErrorKind::io: return "io";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the categories above.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace conic_scatter
