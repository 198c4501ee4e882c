#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace meanfield {

enum class ErrorCode {
  kInvalidArgument,
  kDimensionMismatch,
  kSingularCovariance,
  kCoverage,
  kGridMismatch,
  kOutOfDomain,
  kDegenerateEvidence,
  kKernelMismatch,
  kModelNotLinear,
  kUnknownFamily,
  kConfig,
  kIo,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library. The optional step index is attached
/// by the filter drivers when a recursion aborts part-way through.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  const std::optional<int>& step() const noexcept { return step_; }

  Error with_step(int step) const {
    Error copy = *this;
    copy.step_ = step;
    return copy;
  }

 private:
  ErrorCode code_;
  std::optional<int> step_;
};

}  // namespace meanfield
