#pragma once

#include <mutex>
#include <string>
#include <vector>

#include "psv/subprocess.hpp"
#include "psv/verifier.hpp"

namespace psv {

struct VerusOptions {
  /// Executable; empty means $PSV_VERUS_BIN, then `verus` on PATH.
  std::string binary;
  double timeout_seconds = 60.0;
  std::vector<std::string> extra_args = {"--crate-type=lib"};
  /// Where per-check temporary files go; empty means the system temp dir.
  fs::path scratch_dir;
};

/// Config value wins, then $PSV_VERUS_BIN, then "verus".
std::string resolve_verus_binary(const std::string& configured);

/// Maps a finished tool invocation to a verdict. Verified requires a
/// normal exit and zero reported verification errors.
VerifierVerdict classify_verus_result(const ProcessResult& r);

/// Verus via one temporary file and one subprocess per check.
class VerusBackend final : public VerificationBackend {
 public:
  explicit VerusBackend(VerusOptions options);

  std::string name() const override { return "verus"; }
  std::string version() const override;
  VerifierVerdict verify_solution(const ProblemSpec& spec, std::string_view code) const override;
  VerifierVerdict verify_spec_only(const ProblemSpec& spec) const override;

  /// Checks an arbitrary complete program.
  VerifierVerdict verify_program(std::string_view program) const;

  const VerusOptions& options() const { return options_; }

 private:
  VerusOptions options_;
  mutable std::once_flag version_once_;
  mutable std::string version_;
};

}  // namespace psv
