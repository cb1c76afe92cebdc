#pragma once

#include <string>
#include <string_view>

#include "psv/common.hpp"

namespace psv {

enum class VerdictStatus { Verified, Rejected, Timeout, ToolError };

std::string_view to_string(VerdictStatus s);
VerdictStatus verdict_status_from_string(std::string_view s);

struct VerifierVerdict {
  VerdictStatus status = VerdictStatus::ToolError;
  /// Tool output; empty for Verified, never empty for Rejected.
  std::string diagnostics;
  double wall_time = 0.0;

  bool verified() const { return status == VerdictStatus::Verified; }

  static VerifierVerdict verified_in(double seconds) {
    return {VerdictStatus::Verified, {}, seconds};
  }
  static VerifierVerdict rejected(std::string why, double seconds = 0.0);
  static VerifierVerdict tool_error(std::string why, double seconds = 0.0) {
    return {VerdictStatus::ToolError, std::move(why), seconds};
  }
  static VerifierVerdict timeout(double seconds) {
    return {VerdictStatus::Timeout, "verifier timed out", seconds};
  }

  bool operator==(const VerifierVerdict&) const = default;
};

json to_json(const VerifierVerdict& v);
VerifierVerdict verdict_from_json(const json& j);

}  // namespace psv
