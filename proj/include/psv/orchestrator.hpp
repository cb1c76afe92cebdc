#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "psv/config.hpp"
#include "psv/datapool.hpp"
#include "psv/generation.hpp"
#include "psv/proposer.hpp"
#include "psv/rft.hpp"
#include "psv/verifier.hpp"

namespace psv {

enum class Phase { Solve, Train, Eval, Propose };
std::string_view to_string(Phase p);
Phase phase_from_string(std::string_view s);

struct RunBackends {
  std::shared_ptr<const GenerationBackend> solver;
  std::shared_ptr<const GenerationBackend> proposer;
  std::shared_ptr<const VerificationBackend> verifier;
  std::shared_ptr<const Trainer> trainer;
};

/// Builds backends from the configuration (HTTP, scripted or toy solver;
/// Verus or toy oracle; command or mock trainer).
RunBackends make_backends(const RunConfig& config);
ModelRef base_solver(const RunConfig& config);
ModelRef proposer_model(const RunConfig& config);

/// Reads X_0: a directory of .rs files (sorted by name) or a .jsonl file of
/// {"text": ...} records. Each entry may be a bare spec or a full program.
std::vector<ProblemSpec> load_specs(const fs::path& path);

struct RunOptions {
  bool resume = false;
  /// Test hook: stop with a resumable failure right after this phase.
  std::optional<std::pair<int, Phase>> halt_after;
};

struct RunResult {
  int exit_code = 0;  // 0 done, 2 resumable failure, 3 config error
  std::string message;
};

namespace run_files {
inline constexpr const char* kConfig = "config.snapshot";
inline constexpr const char* kState = "state.json";
inline constexpr const char* kManifest = "run.json";
inline constexpr const char* kRegistry = "registry.json";
inline constexpr const char* kProposer = "proposer_state.json";
inline constexpr const char* kSeeds = "seeds.json";
inline constexpr const char* kIterations = "iterations";
inline constexpr const char* kRft = "rft.jsonl";
inline constexpr const char* kMetrics = "metrics.json";
inline constexpr const char* kProposals = "proposals.jsonl";
inline constexpr const char* kProposalSummary = "proposals.json";
inline constexpr const char* kAggregate = "aggregate.json";
}  // namespace run_files

fs::path iteration_dir(const fs::path& run_dir, int t);

/// Runs (or resumes) the self-play loop in `run_dir`. Never throws for
/// run-time failures; they surface as exit codes.
RunResult run(const RunConfig& config, const fs::path& run_dir, const RunBackends& backends,
              const RunOptions& options = {});

/// `seeds` independent runs with seeds config.seed + i under
/// run_dir/seed_{i}, plus aggregate.json over each iteration's metrics.
/// A single seed runs directly in run_dir.
RunResult run_seeds(const RunConfig& config, const fs::path& run_dir, int seeds,
                    const RunOptions& options = {});

}  // namespace psv
