#include "psv/config.hpp"

#include <set>

namespace psv {

namespace {

// Expands dotted top-level keys into nested objects.
json expand_dotted(const json& in) {
  json out = json::object();
  for (const auto& [key, value] : in.items()) {
    const auto parts = split(key, '.');
    json* node = &out;
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      auto& child = (*node)[parts[i]];
      if (child.is_null()) child = json::object();
      if (!child.is_object()) throw ConfigError("config key " + key + " conflicts with a value");
      node = &child;
    }
    if (value.is_object() && node->contains(parts.back()) && (*node)[parts.back()].is_object()) {
      for (const auto& [k, v] : expand_dotted(value).items()) (*node)[parts.back()][k] = v;
    } else {
      (*node)[parts.back()] = value.is_object() ? expand_dotted(value) : value;
    }
  }
  return out;
}

void reject_unknown(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, value] : obj.items()) {
    if (!known.contains(key)) throw ConfigError("unknown config key " + where + key);
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config key " + where + key + " has the wrong type");
  }
}

std::string resolve_path(const std::string& p, const fs::path& base) {
  if (p.empty() || base.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (base / path).lexically_normal().string();
}

const std::set<std::string> kBackendKeys = {"backend", "endpoint", "path", "model", "transcript",
                                            "max_in_flight", "max_tokens", "temperature",
                                            "initial_backoff_seconds"};

BackendConfig read_backend(const json& obj, BackendConfig base, const std::string& where,
                           const fs::path& dir) {
  reject_unknown(obj, kBackendKeys, where);
  read(obj, "backend", base.kind, where);
  read(obj, "endpoint", base.endpoint, where);
  read(obj, "path", base.path, where);
  read(obj, "model", base.model, where);
  read(obj, "transcript", base.transcript, where);
  read(obj, "max_in_flight", base.max_in_flight, where);
  read(obj, "max_tokens", base.max_tokens, where);
  read(obj, "temperature", base.temperature, where);
  read(obj, "initial_backoff_seconds", base.initial_backoff_seconds, where);
  base.transcript = resolve_path(base.transcript, dir);
  return base;
}

json backend_json(const BackendConfig& b) {
  return {{"backend", b.kind},
          {"endpoint", b.endpoint},
          {"path", b.path},
          {"model", b.model},
          {"transcript", b.transcript},
          {"max_in_flight", b.max_in_flight},
          {"max_tokens", b.max_tokens},
          {"temperature", b.temperature},
          {"initial_backoff_seconds", b.initial_backoff_seconds}};
}

}  // namespace

RunConfig RunConfig::from_json(const json& raw, const fs::path& base_dir) {
  if (!raw.is_object()) throw ConfigError("config must be a JSON object");
  const json j = expand_dotted(raw);
  reject_unknown(j,
                 {"T", "B", "k_trn", "k_prop", "tau_E", "tau_M", "seed", "seeds",
                  "solver_exemplar", "ablation", "targets", "eval", "generation", "proposer",
                  "verifier", "trainer", "toy", "rft"},
                 "");
  RunConfig c;
  read(j, "T", c.T, "");
  read(j, "B", c.B, "");
  read(j, "k_trn", c.k_trn, "");
  read(j, "k_prop", c.k_prop, "");
  read(j, "tau_E", c.tau_E, "");
  read(j, "tau_M", c.tau_M, "");
  read(j, "seed", c.seed, "");
  read(j, "seeds", c.seeds, "");
  read(j, "solver_exemplar", c.solver_exemplar, "");
  c.seeds = resolve_path(c.seeds, base_dir);
  c.solver_exemplar = resolve_path(c.solver_exemplar, base_dir);

  if (j.contains("targets")) {
    std::vector<std::string> names;
    read(j, "targets", names, "");
    c.targets.clear();
    for (const auto& n : names) {
      try {
        c.targets.push_back(difficulty_from_string(n));
      } catch (const SchemaError&) {
        throw ConfigError("unknown difficulty target " + n);
      }
    }
  }
  if (j.contains("ablation")) {
    const auto& a = j["ablation"];
    reject_unknown(a, {"verification_on", "difficulty_labels_on", "context_resampling_on"},
                   "ablation.");
    read(a, "verification_on", c.verification_on, "ablation.");
    read(a, "difficulty_labels_on", c.difficulty_labels_on, "ablation.");
    read(a, "context_resampling_on", c.context_resampling_on, "ablation.");
  }
  if (j.contains("eval")) {
    const auto& e = j["eval"];
    reject_unknown(e, {"enabled", "n", "k", "datasets", "seed_set"}, "eval.");
    read(e, "enabled", c.eval_enabled, "eval.");
    read(e, "n", c.eval_n, "eval.");
    read(e, "k", c.eval_ks, "eval.");
    read(e, "seed_set", c.eval_seed_set, "eval.");
    read(e, "datasets", c.eval_datasets, "eval.");
    for (auto& [name, path] : c.eval_datasets) path = resolve_path(path, base_dir);
  }
  if (j.contains("generation")) {
    c.generation = read_backend(j["generation"], c.generation, "generation.", base_dir);
  }
  c.proposer = c.generation;
  c.proposer.transcript.clear();
  if (j.contains("proposer")) {
    c.proposer = read_backend(j["proposer"], c.proposer, "proposer.", base_dir);
  } else {
    c.proposer.transcript = c.generation.transcript;
  }
  if (j.contains("verifier")) {
    const auto& v = j["verifier"];
    reject_unknown(v, {"backend", "binary", "timeout_seconds", "max_in_flight", "extra_args"},
                   "verifier.");
    read(v, "backend", c.verifier.kind, "verifier.");
    read(v, "binary", c.verifier.binary, "verifier.");
    read(v, "timeout_seconds", c.verifier.timeout_seconds, "verifier.");
    read(v, "max_in_flight", c.verifier.max_in_flight, "verifier.");
    read(v, "extra_args", c.verifier.extra_args, "verifier.");
  }
  if (j.contains("trainer")) {
    const auto& t = j["trainer"];
    reject_unknown(t, {"command", "timeout_seconds"}, "trainer.");
    read(t, "command", c.trainer_command, "trainer.");
    read(t, "timeout_seconds", c.trainer_timeout_seconds, "trainer.");
  }
  if (j.contains("toy")) {
    const auto& t = j["toy"];
    reject_unknown(t, {"p0", "gamma"}, "toy.");
    read(t, "p0", c.toy_p0, "toy.");
    read(t, "gamma", c.toy_gamma, "toy.");
  }
  if (j.contains("rft")) {
    const auto& r = j["rft"];
    reject_unknown(r, {"spot_check"}, "rft.");
    read(r, "spot_check", c.rft_spot_check, "rft.");
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return from_json(j, fs::absolute(path).parent_path());
}

void RunConfig::validate() const {
  if (T < 0) throw ConfigError("T must be >= 0");
  if (B < 0) throw ConfigError("B must be >= 0");
  if (k_trn < 1) throw ConfigError("k_trn must be >= 1");
  if (k_prop < 0) throw ConfigError("k_prop must be >= 0");
  if (!(0.0 < tau_M && tau_M < tau_E && tau_E <= 1.0)) {
    throw ConfigError("thresholds must satisfy 0 < tau_M < tau_E <= 1");
  }
  if (difficulty_labels_on && k_prop % 4 != 0) {
    throw ConfigError("k_prop must be divisible by 4 when difficulty labels are on");
  }
  if (targets.empty() && B > 0) throw ConfigError("no proposal targets");
  if (eval_n < 1) throw ConfigError("eval.n must be >= 1");
  for (int k : eval_ks) {
    if (k < 1 || k > eval_n) throw ConfigError("eval.k values must lie in [1, eval.n]");
  }
  for (const auto* b : {&generation, &proposer}) {
    if (b->kind != "http" && b->kind != "scripted" && b->kind != "toy") {
      throw ConfigError("unknown generation backend " + b->kind);
    }
    if (b->kind == "scripted" && b->transcript.empty()) {
      throw ConfigError("scripted backend needs a transcript");
    }
    if (b->temperature < 0.0) throw ConfigError("temperature must be >= 0");
  }
  if (verifier.kind != "verus" && verifier.kind != "toy") {
    throw ConfigError("unknown verifier backend " + verifier.kind);
  }
  if (verifier.timeout_seconds <= 0.0) throw ConfigError("verifier timeout must be positive");
  if (toy_p0 < 0.0 || toy_gamma < 0.0) throw ConfigError("toy solver parameters must be >= 0");
}

json RunConfig::to_json() const {
  json targets_json = json::array();
  for (auto d : targets) targets_json.push_back(std::string(to_string(d)));
  return {{"T", T},
          {"B", B},
          {"k_trn", k_trn},
          {"k_prop", k_prop},
          {"tau_E", tau_E},
          {"tau_M", tau_M},
          {"seed", seed},
          {"seeds", seeds},
          {"solver_exemplar", solver_exemplar},
          {"targets", targets_json},
          {"ablation",
           {{"verification_on", verification_on},
            {"difficulty_labels_on", difficulty_labels_on},
            {"context_resampling_on", context_resampling_on}}},
          {"eval",
           {{"enabled", eval_enabled},
            {"n", eval_n},
            {"k", eval_ks},
            {"seed_set", eval_seed_set},
            {"datasets", eval_datasets}}},
          {"generation", backend_json(generation)},
          {"proposer", backend_json(proposer)},
          {"verifier",
           {{"backend", verifier.kind},
            {"binary", verifier.binary},
            {"timeout_seconds", verifier.timeout_seconds},
            {"max_in_flight", verifier.max_in_flight},
            {"extra_args", verifier.extra_args}}},
          {"trainer", {{"command", trainer_command}, {"timeout_seconds", trainer_timeout_seconds}}},
          {"toy", {{"p0", toy_p0}, {"gamma", toy_gamma}}},
          {"rft", {{"spot_check", rft_spot_check}}}};
}

std::string RunConfig::snapshot_text() const { return to_json().dump(2) + "\n"; }

std::string RunConfig::hash() const { return sha256_hex(snapshot_text()); }

}  // namespace psv
