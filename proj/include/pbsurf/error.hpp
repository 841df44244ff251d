#pragma once

#include <stdexcept>
#include <string>

namespace pbsurf {

enum class ErrorCode {
  invalid_argument,
  chart_mismatch,
  pole_band,
  precondition,
  hypotheses_unmet,
  infeasible,
  topology,
  io,
  parse,
};

const char* to_string(ErrorCode code);

/// Exception carrying a machine-readable category. Every failure the library
/// raises is an Error; callers that need to branch on the reason use code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pbsurf
