#include "psv/rft.hpp"

#include <random>

#include "psv/subprocess.hpp"
#include "psv/toy.hpp"

namespace psv {

std::vector<RftRecord> curate(const DataPool& pool, int iteration, bool verification_on) {
  std::vector<RftRecord> out;
  for (const auto& p : pool.problems()) {
    if (!p.validity.is_valid()) continue;
    for (const auto& a : pool.attempts_for(p.id, iteration)) {
      if (verification_on && !a.verdict.verified()) continue;
      out.push_back({p.id, p.text, a.code, iteration, a.sample_index});
      break;
    }
  }
  return out;
}

json to_json(const RftManifest& m) {
  return {{"schema_version", kSchemaVersion},
          {"count", m.count},
          {"content_hash", m.content_hash},
          {"source_iteration", m.source_iteration},
          {"data_file", m.data_file}};
}

RftManifest rft_manifest_from_json(const json& j) {
  return {j.at("count").get<int>(), j.at("content_hash").get<std::string>(),
          j.at("source_iteration").get<int>(), j.at("data_file").get<std::string>()};
}

fs::path manifest_path_for(const fs::path& rft_path) {
  auto p = rft_path;
  p.replace_extension(".manifest.json");
  return p;
}

RftManifest export_rft(const std::vector<RftRecord>& records, int source_iteration,
                       const fs::path& path, std::string_view solver_exemplar) {
  std::string content;
  for (const auto& r : records) {
    json prompt = json::array();
    for (const auto& m : solver_messages(r.spec_text, solver_exemplar)) {
      prompt.push_back({{"role", m.role}, {"content", m.content}});
    }
    json line = {{"schema_version", kSchemaVersion},
                 {"problem_id", r.problem_id},
                 {"iteration", r.iteration},
                 {"sample_index", r.sample_index},
                 {"spec", r.spec_text},
                 {"prompt", prompt},
                 {"completion",
                  json::array({{{"role", "assistant"},
                                {"content", "```rust\n" + r.solution + "\n```"}}})}};
    content += line.dump();
    content += '\n';
  }
  write_file_atomic(path, content);
  RftManifest m{static_cast<int>(records.size()), sha256_hex(content), source_iteration,
                path.filename().string()};
  write_file_atomic(manifest_path_for(path), to_json(m).dump(2) + "\n");
  return m;
}

std::vector<std::string> spot_check(const std::vector<RftRecord>& records, const DataPool& pool,
                                    const VerificationBackend& verifier, std::size_t sample_size,
                                    std::uint64_t seed) {
  std::vector<std::size_t> idx(records.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[bounded(rng, i)]);
  idx.resize(std::min(sample_size, idx.size()));
  std::vector<std::string> failures;
  for (auto i : idx) {
    const auto& r = records[i];
    const auto* spec = pool.find(r.problem_id);
    if (spec == nullptr || !verifier.verify_solution(*spec, r.solution).verified()) {
      failures.push_back(r.problem_id);
    }
  }
  return failures;
}

void ModelRegistry::add(int iteration, RegistryEntry entry) {
  if (entries_.contains(iteration)) {
    throw Error("a solver is already registered for iteration " + std::to_string(iteration));
  }
  entries_.emplace(iteration, std::move(entry));
}

const ModelRef& ModelRegistry::solver_for(int iteration) const {
  auto it = entries_.find(iteration);
  if (it == entries_.end()) {
    throw Error("no solver registered for iteration " + std::to_string(iteration));
  }
  return it->second.model;
}

json ModelRegistry::to_json() const {
  json models = json::object();
  for (const auto& [t, e] : entries_) {
    json entry = {{"model", psv::to_json(e.model)}};
    entry["trained_on"] = e.trained_on ? psv::to_json(*e.trained_on) : json(nullptr);
    models[std::to_string(t)] = entry;
  }
  return {{"schema_version", kSchemaVersion}, {"models", models}};
}

ModelRegistry ModelRegistry::from_json(const json& j) {
  ModelRegistry reg;
  for (const auto& [key, entry] : j.at("models").items()) {
    RegistryEntry e{model_from_json(entry.at("model")), std::nullopt};
    if (!entry.at("trained_on").is_null()) e.trained_on = rft_manifest_from_json(entry["trained_on"]);
    reg.add(std::stoi(key), std::move(e));
  }
  return reg;
}

void ModelRegistry::save(const fs::path& path) const {
  write_file_atomic(path, to_json().dump(2) + "\n");
}

ModelRegistry ModelRegistry::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  check_schema(j, path);
  try {
    return from_json(j);
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

ModelRef register_model(ModelRegistry& registry, const RftManifest& manifest, ModelRef model) {
  const int next = manifest.source_iteration + 1;
  model.label = "solver@t=" + std::to_string(next);
  registry.add(next, {model, manifest});
  return model;
}

ModelRef MockTrainer::train(const ModelRef& base, const fs::path& rft_path,
                            const RftManifest& manifest, const fs::path&) const {
  ToySolverState state = defaults_;
  if (base.params.contains("trained")) state = ToySolverState::from_json(base.params);
  for (const auto& rec : read_jsonl(rft_path)) {
    std::string family = "opaque";
    try {
      family = toy::ToySpec::parse(rec.at("spec").get<std::string>()).family();
    } catch (const toy::ParseError&) {
    }
    ++state.trained[family];
  }
  ModelRef out = base;
  out.provenance = ModelRef::Provenance::Finetuned;
  out.iteration = manifest.source_iteration + 1;
  out.params = state.to_json();
  return out;
}

ModelRef CommandTrainer::train(const ModelRef& base, const fs::path& rft_path,
                               const RftManifest& manifest, const fs::path& out_dir) const {
  if (command_.empty()) throw ConfigError("trainer command is empty");
  fs::create_directories(out_dir);
  auto argv = command_;
  argv.insert(argv.end(), {"--data", rft_path.string(), "--base", base.id, "--out",
                           out_dir.string()});
  const auto r = run_process(argv, timeout_seconds_);
  if (!r.ok()) {
    throw Error("trainer command failed (exit " + std::to_string(r.exit_code) + "): " +
                (r.spawn_failed ? r.spawn_error : r.output));
  }
  const auto mpath = out_dir / "manifest.json";
  json m;
  try {
    m = json::parse(read_file(mpath));
  } catch (const std::exception& e) {
    throw SchemaError("trainer manifest " + mpath.string() + ": " + e.what());
  }
  ModelRef out = base;
  out.provenance = ModelRef::Provenance::Finetuned;
  out.iteration = manifest.source_iteration + 1;
  if (m.contains("model_id")) {
    out.id = m["model_id"].get<std::string>();
  } else if (m.contains("checkpoint")) {
    out.id = m["checkpoint"].get<std::string>();
  } else {
    throw SchemaError("trainer manifest names neither model_id nor checkpoint");
  }
  out.endpoint = m.value("endpoint", base.endpoint);
  out.params = {{"trainer_manifest", m}};
  return out;
}

}  // namespace psv
