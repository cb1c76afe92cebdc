#pragma once

#include <map>
#include <string>
#include <vector>

#include "psv/datapool.hpp"
#include "psv/generation.hpp"
#include "psv/verifier.hpp"

namespace psv {

struct RftRecord {
  std::string problem_id;
  std::string spec_text;
  std::string solution;
  int iteration = 0;
  int sample_index = 1;

  bool operator==(const RftRecord&) const = default;
};

/// At most one attempt per problem from iteration t, lowest sample index
/// first. With verification on only Verified attempts qualify; with it off
/// every attempted problem contributes its first attempt.
std::vector<RftRecord> curate(const DataPool& pool, int iteration, bool verification_on);

struct RftManifest {
  int count = 0;
  std::string content_hash;  // sha256 of the rft.jsonl bytes
  int source_iteration = 0;
  std::string data_file;

  bool operator==(const RftManifest&) const = default;
};

json to_json(const RftManifest& m);
RftManifest rft_manifest_from_json(const json& j);

/// Writes `path` as {prompt, completion} lines (conversational form, the
/// prompt being the full solver prompt including the exemplar) and
/// `<stem>.manifest.json` next to it.
RftManifest export_rft(const std::vector<RftRecord>& records, int source_iteration,
                       const fs::path& path, std::string_view solver_exemplar = {});

fs::path manifest_path_for(const fs::path& rft_path);

/// Re-verifies up to `sample_size` records chosen by `seed`. Returns the
/// ids of records that did not come back Verified.
std::vector<std::string> spot_check(const std::vector<RftRecord>& records, const DataPool& pool,
                                    const VerificationBackend& verifier, std::size_t sample_size,
                                    std::uint64_t seed);

struct RegistryEntry {
  ModelRef model;
  std::optional<RftManifest> trained_on;
};

/// Iteration -> solver. The orchestrator only ever reads the solver for an
/// iteration from here.
class ModelRegistry {
 public:
  /// Throws on a duplicate registration for the same iteration.
  void add(int iteration, RegistryEntry entry);
  /// Throws when nothing is registered for `iteration`.
  const ModelRef& solver_for(int iteration) const;
  bool has(int iteration) const { return entries_.contains(iteration); }
  const std::map<int, RegistryEntry>& entries() const { return entries_; }

  json to_json() const;
  static ModelRegistry from_json(const json& j);
  void save(const fs::path& path) const;
  static ModelRegistry load(const fs::path& path);

 private:
  std::map<int, RegistryEntry> entries_;
};

/// Records that the export in `manifest` (iteration t) produced the solver
/// for t + 1.
ModelRef register_model(ModelRegistry& registry, const RftManifest& manifest, ModelRef model);

/// Blocking training step: base solver + exported data -> new solver.
class Trainer {
 public:
  virtual ~Trainer() = default;
  virtual std::string name() const = 0;
  virtual ModelRef train(const ModelRef& base, const fs::path& rft_path,
                         const RftManifest& manifest, const fs::path& out_dir) const = 0;
};

/// Test double: advances the toy solver state by counting exported records
/// per template family, always starting from the base state.
class MockTrainer final : public Trainer {
 public:
  explicit MockTrainer(ToySolverState defaults = {}) : defaults_(std::move(defaults)) {}
  std::string name() const override { return "mock"; }
  ModelRef train(const ModelRef& base, const fs::path& rft_path, const RftManifest& manifest,
                 const fs::path& out_dir) const override;

 private:
  ToySolverState defaults_;
};

/// Runs `command --data RFT --base MODEL --out DIR` and reads
/// DIR/manifest.json. Recognised manifest keys: model_id, checkpoint,
/// endpoint.
class CommandTrainer final : public Trainer {
 public:
  explicit CommandTrainer(std::vector<std::string> command, double timeout_seconds = 0.0)
      : command_(std::move(command)), timeout_seconds_(timeout_seconds) {}
  std::string name() const override { return "command"; }
  ModelRef train(const ModelRef& base, const fs::path& rft_path, const RftManifest& manifest,
                 const fs::path& out_dir) const override;

 private:
  std::vector<std::string> command_;
  double timeout_seconds_;
};

}  // namespace psv
