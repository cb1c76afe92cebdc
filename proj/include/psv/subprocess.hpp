#pragma once

#include <string>
#include <vector>

#include "psv/common.hpp"

namespace psv {

struct ProcessResult {
  int exit_code = -1;
  int term_signal = 0;
  bool timed_out = false;
  bool spawn_failed = false;
  std::string spawn_error;
  /// Interleaved stdout and stderr.
  std::string output;
  double wall_time = 0.0;

  bool ok() const { return !spawn_failed && !timed_out && term_signal == 0 && exit_code == 0; }
};

/// Runs argv[0] (PATH lookup) with a hard wall-clock limit. The child gets
/// its own process group, which is killed on timeout. timeout_seconds <= 0
/// disables the limit.
ProcessResult run_process(const std::vector<std::string>& argv, double timeout_seconds,
                          const fs::path& working_dir = {});

}  // namespace psv
