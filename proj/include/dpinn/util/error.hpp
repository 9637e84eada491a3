#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpinn {

enum class ErrorKind {
  invalid_architecture,
  invalid_input,
  unsupported_architecture,
  diverged_evaluation,
  diverged_training,
  degenerate_problem,
  solver_error,
  singular_system,
  invalid_config,
  domain_error,
  unsupported,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_architecture: return "invalid-architecture";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::unsupported_architecture: return "unsupported-architecture";
    case ErrorKind::diverged_evaluation: return "diverged-evaluation";
    case ErrorKind::diverged_training: return "diverged-training";
    case ErrorKind::degenerate_problem: return "degenerate-problem";
    case ErrorKind::solver_error: return "solver-error";
    case ErrorKind::singular_system: return "singular-system";
    case ErrorKind::invalid_config: return "invalid-config";
    case ErrorKind::domain_error: return "domain-error";
    case ErrorKind::unsupported: return "unsupported";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the kinds above so
/// callers (the CLI in particular) can map it to an exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace dpinn
