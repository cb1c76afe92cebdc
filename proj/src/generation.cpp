#include "psv/generation.hpp"

#include <algorithm>

#include "psv/parallel.hpp"
#include "psv/prompts.hpp"
#include "psv/specpipe.hpp"
#include "psv/toy.hpp"

namespace psv {

void validate(const GenerationRequest& r) {
  if (r.n < 1) throw Error("generation request needs n >= 1");
  if (r.temperature < 0.0) throw Error("generation request needs temperature >= 0");
}

std::string prompt_hash(const std::vector<ChatMessage>& messages) {
  json j = json::array();
  for (const auto& m : messages) j.push_back({{"role", m.role}, {"content", m.content}});
  return sha256_hex(j.dump());
}

ModelRef ModelRef::base(std::string id) {
  ModelRef m;
  m.label = "solver@t=0";
  m.id = std::move(id);
  return m;
}

json to_json(const ModelRef& m) {
  return {{"id", m.id},
          {"label", m.label},
          {"endpoint", m.endpoint},
          {"provenance", m.provenance == ModelRef::Provenance::Base ? "base" : "finetuned"},
          {"iteration", m.iteration},
          {"params", m.params}};
}

ModelRef model_from_json(const json& j) {
  ModelRef m;
  m.id = j.at("id").get<std::string>();
  m.label = j.value("label", "");
  m.endpoint = j.value("endpoint", "");
  const auto prov = j.value("provenance", "base");
  if (prov == "base") {
    m.provenance = ModelRef::Provenance::Base;
  } else if (prov == "finetuned") {
    m.provenance = ModelRef::Provenance::Finetuned;
  } else {
    throw SchemaError("unknown model provenance " + prov);
  }
  m.iteration = j.value("iteration", 0);
  m.params = j.value("params", json::object());
  return m;
}

// --- scripted -------------------------------------------------------------

ScriptedBackend::ScriptedBackend(json transcript) {
  if (!transcript.is_object()) throw SchemaError("transcript must be a JSON object");
  for (auto& [key, value] : transcript.items()) {
    if (key == "schema_version") continue;
    if (!value.is_array()) throw SchemaError("transcript entry " + key + " is not a list");
    entries_[key] = value.get<std::vector<std::string>>();
  }
}

ScriptedBackend ScriptedBackend::from_file(const fs::path& path) {
  try {
    return ScriptedBackend(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> ScriptedBackend::generate(const ModelRef&,
                                                   const GenerationRequest& request) const {
  validate(request);
  auto it = entries_.find(prompt_hash(request.messages));
  if (it == entries_.end() && !request.tag.empty()) it = entries_.find("tag:" + request.tag);
  if (it == entries_.end()) {
    throw BackendError("scripted backend has no entry for prompt " +
                       prompt_hash(request.messages) + " (tag " + request.tag + ")");
  }
  if (static_cast<int>(it->second.size()) < request.n) {
    throw BackendError("scripted entry " + it->first + " holds " +
                       std::to_string(it->second.size()) + " completions, " +
                       std::to_string(request.n) + " requested");
  }
  return {it->second.begin(), it->second.begin() + request.n};
}

// --- toy solver -----------------------------------------------------------

double ToySolverState::probability(const std::string& family) const {
  const auto it = trained.find(family);
  const int n = it == trained.end() ? 0 : it->second;
  return std::min(1.0, p0 + gamma * n);
}

json ToySolverState::to_json() const {
  return {{"kind", "toy-solver"}, {"p0", p0}, {"gamma", gamma}, {"trained", trained}};
}

ToySolverState ToySolverState::from_json(const json& j) {
  ToySolverState s;
  s.p0 = j.at("p0").get<double>();
  s.gamma = j.at("gamma").get<double>();
  s.trained = j.value("trained", std::map<std::string, int>{});
  return s;
}

std::vector<std::string> trainable_toy_solver(const ToySolverState& state,
                                              std::string_view problem_id,
                                              std::string_view spec_text, int k,
                                              std::uint64_t seed) {
  const auto spec = toy::ToySpec::parse(spec_text);
  const double p = state.probability(spec.family());
  const std::string target = spec.ensures.value_or("0");
  const std::uint64_t problem_seed = derive_seed(seed, problem_id);
  std::vector<std::string> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int j = 1; j <= k; ++j) {
    const double u = unit_interval(derive_seed(problem_seed, static_cast<std::uint64_t>(j)));
    out.push_back(u < p ? "(" + target + ")" : "(" + target + ") + 1");
  }
  return out;
}

std::vector<std::string> ToySolverBackend::generate(const ModelRef& model,
                                                    const GenerationRequest& request) const {
  validate(request);
  ToySolverState state = base_;
  if (model.params.contains("trained")) state = ToySolverState::from_json(model.params);
  std::vector<std::string> out;
  std::vector<std::string> bodies;
  try {
    bodies = trainable_toy_solver(state, request.subject_id, request.subject_spec, request.n,
                                  request.seed);
  } catch (const toy::ParseError&) {
    // Not a toy spec: the solver has nothing to offer.
    return std::vector<std::string>(static_cast<std::size_t>(request.n), "I cannot solve this.");
  }
  for (const auto& body : bodies) {
    out.push_back("```rust\n" + specpipe::assemble_program(request.subject_spec, body) + "```\n");
  }
  return out;
}

// --- recording ------------------------------------------------------------

std::vector<std::string> RecordingBackend::generate(const ModelRef& model,
                                                    const GenerationRequest& request) const {
  {
    std::lock_guard lock(mutex_);
    requests_.push_back(request);
  }
  return inner_->generate(model, request);
}

std::vector<GenerationRequest> RecordingBackend::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

// --- sampling -------------------------------------------------------------

std::vector<ChatMessage> solver_messages(std::string_view spec_text, std::string_view exemplar) {
  const auto& t = prompts::solver();
  const std::string ex(exemplar.empty() ? prompts::solver_exemplar() : exemplar);
  std::vector<ChatMessage> messages;
  if (!t.system.empty()) messages.push_back({"system", t.system});
  messages.push_back(
      {"user", prompts::substitute(t.user, {{"exemplar", trim(ex)}, {"spec", std::string(spec_text)}})});
  return messages;
}

std::vector<std::string> sample_solutions(const GenerationBackend& backend, const ModelRef& model,
                                          const ProblemSpec& spec, int k,
                                          const SamplingConfig& config, std::uint64_t seed,
                                          std::string tag) {
  if (!spec.validity.is_valid()) throw Error("refusing to solve invalid spec " + spec.id);
  if (k < 1) throw Error("sample_solutions needs k >= 1");
  GenerationRequest req;
  req.messages = solver_messages(spec.text, config.solver_exemplar);
  req.n = k;
  req.temperature = config.temperature;
  req.max_tokens = config.max_tokens;
  req.seed = seed;
  req.tag = std::move(tag);
  req.subject_id = spec.id;
  req.subject_spec = spec.text;
  const auto completions = backend.generate(model, req);
  if (static_cast<int>(completions.size()) != k) {
    throw BackendError("backend returned " + std::to_string(completions.size()) + " of " +
                       std::to_string(k) + " samples");
  }
  std::vector<std::string> out;
  out.reserve(completions.size());
  for (const auto& c : completions) out.push_back(specpipe::first_code_block(c));
  return out;
}

std::vector<std::string> sample_proposals(const GenerationBackend& backend, const ModelRef& model,
                                          const std::vector<ChatMessage>& prompt, int count,
                                          const SamplingConfig& config, std::uint64_t seed,
                                          std::string tag) {
  if (count <= 0) return {};
  GenerationRequest req;
  req.messages = prompt;
  req.n = count;
  req.temperature = config.temperature;
  req.max_tokens = config.max_tokens;
  req.seed = seed;
  req.tag = std::move(tag);
  auto completions = backend.generate(model, req);
  if (static_cast<int>(completions.size()) != count) {
    throw BackendError("backend returned " + std::to_string(completions.size()) + " of " +
                       std::to_string(count) + " proposals");
  }
  return completions;
}

}  // namespace psv
