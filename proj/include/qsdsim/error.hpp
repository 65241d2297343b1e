#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qsdsim {

enum class ErrorCode {
  invalid_parameter,
  invalid_measure,
  unsupported_metric,
  instance_too_large,
  invalid_test_function,
  invalid_state,
  invalid_penalty,
  unsupported_model,
  requires_exact_arithmetic,
  invalid_curve,
  invalid_constants,
  degenerate_constants,
  numerical_underflow,
  invalid_config,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

}  // namespace qsdsim
