#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "psv/common.hpp"
#include "psv/datapool.hpp"

namespace psv {

struct ChatMessage {
  std::string role;
  std::string content;
  bool operator==(const ChatMessage&) const = default;
};

struct GenerationRequest {
  std::vector<ChatMessage> messages;
  int n = 1;
  double temperature = 0.8;
  int max_tokens = 2048;
  std::uint64_t seed = 0;

  // Routing metadata for local backends; never sent over the wire.
  /// Stable label such as "propose/t=1/HARD", used as a replay key.
  std::string tag;
  std::string subject_id;
  std::string subject_spec;
};

void validate(const GenerationRequest& r);

/// sha256 over the message list; the replay key for scripted transcripts.
std::string prompt_hash(const std::vector<ChatMessage>& messages);

/// Opaque reference to a model (the solver at some iteration). Weights
/// never live here.
struct ModelRef {
  enum class Provenance { Base, Finetuned };

  std::string id;        // model name sent to the endpoint, or checkpoint id
  std::string label;     // e.g. "solver@t=3"
  std::string endpoint;  // overrides the backend default when non-empty
  Provenance provenance = Provenance::Base;
  int iteration = 0;     // training iteration for Finetuned
  json params = json::object();  // backend-specific state (toy solver counts)

  static ModelRef base(std::string id);
  bool operator==(const ModelRef&) const = default;
};

json to_json(const ModelRef& m);
ModelRef model_from_json(const json& j);

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string name() const = 0;
  /// Returns exactly request.n completions. Throws BackendError.
  virtual std::vector<std::string> generate(const ModelRef& model,
                                            const GenerationRequest& request) const = 0;
};

/// Replays completions from a transcript:
///   { "<prompt sha256>": [completions...], "tag:<request tag>": [...] }
/// Prompt-hash entries take precedence over tag entries.
class ScriptedBackend final : public GenerationBackend {
 public:
  explicit ScriptedBackend(json transcript);
  static ScriptedBackend from_file(const fs::path& path);

  std::string name() const override { return "scripted"; }
  std::vector<std::string> generate(const ModelRef& model,
                                    const GenerationRequest& request) const override;

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

/// Stand-in for a trainable solver on the toy domain: a spec of family f
/// is solved with probability min(1, p0 + gamma * trained(f)).
struct ToySolverState {
  double p0 = 0.1;
  double gamma = 0.15;
  std::map<std::string, int> trained;

  double probability(const std::string& family) const;
  json to_json() const;
  static ToySolverState from_json(const json& j);
};

/// Candidate expressions for sample indices 1..k. Sample j draws
/// u = U(seed, problem_id, j) and is correct iff u < p, so raising p only
/// ever turns wrong samples into correct ones.
std::vector<std::string> trainable_toy_solver(const ToySolverState& state,
                                              std::string_view problem_id,
                                              std::string_view spec_text, int k,
                                              std::uint64_t seed);

/// Generation backend over trainable_toy_solver. Reads its state from
/// ModelRef::params; completions carry a fenced full program.
class ToySolverBackend final : public GenerationBackend {
 public:
  explicit ToySolverBackend(ToySolverState base) : base_(std::move(base)) {}

  std::string name() const override { return "toy-solver"; }
  std::vector<std::string> generate(const ModelRef& model,
                                    const GenerationRequest& request) const override;
  const ToySolverState& base_state() const { return base_; }

 private:
  ToySolverState base_;
};

struct HttpBackendOptions {
  std::string endpoint = "http://127.0.0.1:30000";
  std::string path = "/v1/chat/completions";
  std::string api_key;
  double request_timeout_seconds = 600.0;
  int max_attempts = 3;
  double initial_backoff_seconds = 1.0;
};

/// Chat-completions style HTTP backend (any OpenAI-compatible server).
class HttpBackend final : public GenerationBackend {
 public:
  explicit HttpBackend(HttpBackendOptions options) : options_(std::move(options)) {}

  std::string name() const override { return "http"; }
  std::vector<std::string> generate(const ModelRef& model,
                                    const GenerationRequest& request) const override;

  static json request_body(const ModelRef& model, const GenerationRequest& request);

 private:
  HttpBackendOptions options_;
};

/// Wraps a backend and remembers every request it forwarded.
class RecordingBackend final : public GenerationBackend {
 public:
  explicit RecordingBackend(std::shared_ptr<const GenerationBackend> inner)
      : inner_(std::move(inner)) {}

  std::string name() const override { return inner_->name(); }
  std::vector<std::string> generate(const ModelRef& model,
                                    const GenerationRequest& request) const override;
  std::vector<GenerationRequest> requests() const;

 private:
  std::shared_ptr<const GenerationBackend> inner_;
  mutable std::mutex mutex_;
  mutable std::vector<GenerationRequest> requests_;
};

struct SamplingConfig {
  double temperature = 0.8;
  int max_tokens = 2048;
  int max_in_flight = 0;  // <= 0: one per logical core
  std::string solver_exemplar;  // empty: built-in placeholder asset
};

/// Solver prompt: fixed 1-shot exemplar followed by the spec.
std::vector<ChatMessage> solver_messages(std::string_view spec_text,
                                         std::string_view exemplar = {});

/// k candidate programs for one spec: the first fenced block of each
/// completion, or "" when a completion has none.
std::vector<std::string> sample_solutions(const GenerationBackend& backend, const ModelRef& model,
                                          const ProblemSpec& spec, int k,
                                          const SamplingConfig& config, std::uint64_t seed,
                                          std::string tag);

/// Raw proposer completions. count == 0 makes no backend call.
std::vector<std::string> sample_proposals(const GenerationBackend& backend, const ModelRef& model,
                                          const std::vector<ChatMessage>& prompt, int count,
                                          const SamplingConfig& config, std::uint64_t seed,
                                          std::string tag);

}  // namespace psv
