#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace choquard {

enum class ErrorCode {
  invalid_count,
  invalid_radius,
  invalid_profile,
  grid_mismatch,
  out_of_range,
  zero_interaction,
  gamma_equals_one,
  beyond_launch_radius,
  step_underflow,
  nan_detected,
  no_bracket,
  max_iter,
  invariant_violation,
  fit_window_too_short,
  divergence,
  max_steps,
  positivity_violation,
  zero_profile,
  io,
  usage,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_count: return "invalid-count";
    case ErrorCode::invalid_radius: return "invalid-radius";
    case ErrorCode::invalid_profile: return "invalid-profile";
    case ErrorCode::grid_mismatch: return "grid-mismatch";
    case ErrorCode::out_of_range: return "out-of-range";
    case ErrorCode::zero_interaction: return "zero-interaction";
    case ErrorCode::gamma_equals_one: return "gamma-equals-one";
    case ErrorCode::beyond_launch_radius: return "beyond-launch-radius";
    case ErrorCode::step_underflow: return "step-underflow";
    case ErrorCode::nan_detected: return "nan-detected";
    case ErrorCode::no_bracket: return "no-bracket";
    case ErrorCode::max_iter: return "max-iter";
    case ErrorCode::invariant_violation: return "invariant-violation";
    case ErrorCode::fit_window_too_short: return "fit-window-too-short";
    case ErrorCode::divergence: return "divergence";
    case ErrorCode::max_steps: return "max-steps";
    case ErrorCode::positivity_violation: return "positivity-violation";
    case ErrorCode::zero_profile: return "zero-profile";
    case ErrorCode::io: return "io";
    case ErrorCode::usage: return "usage";
  }
  return "unknown";
}

/// Failure of a numerical routine. Carries a machine-readable code and a
/// JSON blob of whatever diagnostics the failing routine had at hand.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what,
        nlohmann::json diagnostics = nlohmann::json::object())
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        diagnostics_(std::move(diagnostics)) {}

  ErrorCode code() const noexcept { return code_; }
  const nlohmann::json& diagnostics() const noexcept { return diagnostics_; }

 private:
  ErrorCode code_;
  nlohmann::json diagnostics_;
};

/// Non-fatal conditions (tail truncation, series divergence heuristics, ...).
struct Warnings {
  std::vector<std::string> messages;

  void add(std::string msg) { messages.push_back(std::move(msg)); }
  bool empty() const noexcept { return messages.empty(); }
  bool contains(std::string_view needle) const {
    for (const auto& m : messages)
      if (m.find(needle) != std::string::npos) return true;
    return false;
  }
};

inline void warn(Warnings* sink, std::string msg) {
  if (sink) sink->add(std::move(msg));
}

}  // namespace choquard
