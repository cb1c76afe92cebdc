#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psv/datapool.hpp"
#include "psv/generation.hpp"
#include "psv/verifier.hpp"

namespace psv {

/// Problem ids per difficulty class, each list in pool insertion order.
using Buckets = std::map<Difficulty, std::vector<std::string>>;

/// Partitions the pool's valid problems by pass rate at iteration t.
/// Throws when any problem lacks a complete solve pass.
Buckets bucketize(const DataPool& pool, int iteration, int k_trn, double tau_easy,
                  double tau_medium);

struct ContextExample {
  std::string problem_id;
  std::string spec_text;
  Difficulty label = Difficulty::Easy;

  bool operator==(const ContextExample&) const = default;
};

json to_json(const ContextExample& e);
ContextExample context_example_from_json(const json& j);

/// Stratified draw of k_prop in-context examples: k_prop/4 per class
/// uniformly without replacement, short classes backfilled from the nearest
/// class in difficulty order (ties go to the easier side). Output
/// interleaves classes. A pool no larger than k_prop is used whole.
std::vector<ContextExample> sample_context(const DataPool& pool, const Buckets& buckets,
                                           int k_prop, std::uint64_t seed);

/// "Problem i: LABEL" headers, or bare "Problem i" with labels off.
std::string render_examples(const std::vector<ContextExample>& context, bool difficulty_labels_on);

std::vector<ChatMessage> build_prompt(const std::vector<ContextExample>& context, Difficulty target,
                                      bool difficulty_labels_on);

/// floor(B / |targets|) per target, remainder one each in target order.
/// Every class is a key; non-targets get zero.
std::map<Difficulty, int> allocate_budget(
    int budget, const std::vector<Difficulty>& targets = {std::begin(kAllDifficulties),
                                                          std::end(kAllDifficulties)});

struct ProposerConfig {
  int k_prop = 12;
  double tau_easy = 0.8;
  double tau_medium = 0.2;
  bool difficulty_labels_on = true;
  bool context_resampling_on = true;
  std::vector<Difficulty> targets{std::begin(kAllDifficulties), std::end(kAllDifficulties)};
  SamplingConfig sampling;
  std::uint64_t seed = 0;
};

/// In-context proposer state. When resampling is off the context is drawn
/// once, on the first proposal round, and reused verbatim afterwards.
struct ProposerState {
  ProposerConfig config;
  std::optional<std::vector<ContextExample>> frozen_context;
};

enum class ProposalStatus { Accepted, NoCodeBlock, ExtractError, DuplicateOfPool, DuplicateInBatch, Invalid };

std::string_view to_string(ProposalStatus s);

struct ProposalRecord {
  int iteration = 0;
  Difficulty target = Difficulty::Easy;
  int completion_index = 0;
  ProposalStatus status = ProposalStatus::NoCodeBlock;
  std::string problem_id;
  std::string spec_text;
  std::string reason;
};

json to_json(const ProposalRecord& r);

struct BatchMetrics {
  int requested = 0;
  int extracted = 0;
  int unique = 0;
  int valid = 0;
  /// unique canonical specs / completions requested
  double uniqueness_rate() const { return requested == 0 ? 0.0 : double(unique) / requested; }
  /// valid / unique
  double validity_rate() const { return unique == 0 ? 0.0 : double(valid) / unique; }
};

json to_json(const BatchMetrics& m);

struct ProposalBatch {
  std::vector<ProblemSpec> accepted;
  std::vector<ProposalRecord> records;
  BatchMetrics metrics;
  /// One prompt per target class actually issued.
  std::vector<std::pair<Difficulty, std::vector<ChatMessage>>> prompts;
};

/// One proposal round: per target class a context sample (fresh unless
/// frozen), a prompt, and budget-many completions; then extraction, dedup
/// against pool and batch, and spec-only verification. Returns only valid,
/// novel specs.
ProposalBatch propose_batch(ProposerState& state, const DataPool& pool, const Buckets& buckets,
                            const GenerationBackend& backend, const ModelRef& model,
                            const VerificationBackend& verifier, int iteration, int budget,
                            int max_in_flight);

}  // namespace psv
