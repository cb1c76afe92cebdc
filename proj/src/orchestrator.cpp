#include "psv/orchestrator.hpp"

#include <algorithm>
#include <iostream>

#include "psv/eval.hpp"
#include "psv/parallel.hpp"
#include "psv/prompts.hpp"
#include "psv/specpipe.hpp"
#include "psv/verus_backend.hpp"

namespace psv {

namespace {

constexpr Phase kPhases[] = {Phase::Solve, Phase::Train, Phase::Eval, Phase::Propose};

std::shared_ptr<const GenerationBackend> make_generation(const BackendConfig& b,
                                                         const RunConfig& c) {
  if (b.kind == "scripted") {
    return std::make_shared<ScriptedBackend>(ScriptedBackend::from_file(b.transcript));
  }
  if (b.kind == "toy") {
    ToySolverState s;
    s.p0 = c.toy_p0;
    s.gamma = c.toy_gamma;
    return std::make_shared<ToySolverBackend>(s);
  }
  HttpBackendOptions o;
  o.endpoint = b.endpoint;
  o.path = b.path;
  o.initial_backoff_seconds = b.initial_backoff_seconds;
  if (const char* key = std::getenv("PSV_API_KEY")) o.api_key = key;
  return std::make_shared<HttpBackend>(o);
}

struct State {
  int iteration = 0;
  Phase phase = Phase::Solve;  // next phase to run
  bool completed = false;
  std::string config_hash;
  std::string last_error;
};

json to_json(const State& s) {
  json j = {{"schema_version", kSchemaVersion},
            {"config_hash", s.config_hash},
            {"next_iteration", s.iteration},
            {"next_phase", std::string(to_string(s.phase))},
            {"completed", s.completed}};
  if (!s.last_error.empty()) j["last_error"] = s.last_error;
  return j;
}

State state_from_file(const fs::path& path) {
  try {
    const json j = json::parse(read_file(path));
    check_schema(j, path);
    State s;
    s.config_hash = j.at("config_hash").get<std::string>();
    s.iteration = j.at("next_iteration").get<int>();
    s.phase = phase_from_string(j.at("next_phase").get<std::string>());
    s.completed = j.at("completed").get<bool>();
    s.last_error = j.value("last_error", "");
    return s;
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

class Loop {
 public:
  Loop(const RunConfig& config, fs::path run_dir, const RunBackends& backends)
      : cfg_(config), dir_(std::move(run_dir)), be_(backends) {
    if (!cfg_.solver_exemplar.empty()) sampling_.solver_exemplar = read_file(cfg_.solver_exemplar);
    sampling_.temperature = cfg_.generation.temperature;
    sampling_.max_tokens = cfg_.generation.max_tokens;
    sampling_.max_in_flight = cfg_.generation.max_in_flight;
    proposer_.config.k_prop = cfg_.k_prop;
    proposer_.config.tau_easy = cfg_.tau_E;
    proposer_.config.tau_medium = cfg_.tau_M;
    proposer_.config.difficulty_labels_on = cfg_.difficulty_labels_on;
    proposer_.config.context_resampling_on = cfg_.context_resampling_on;
    proposer_.config.targets = cfg_.targets;
    proposer_.config.seed = cfg_.seed;
    proposer_.config.sampling = sampling_;
    proposer_.config.sampling.temperature = cfg_.proposer.temperature;
    proposer_.config.sampling.max_tokens = cfg_.proposer.max_tokens;
    proposer_.config.sampling.max_in_flight = cfg_.proposer.max_in_flight;
    state_.config_hash = cfg_.hash();
  }

  RunResult run(const RunOptions& options) {
    const auto state_path = dir_ / run_files::kState;
    if (fs::exists(state_path)) {
      if (!options.resume) {
        throw ConfigError(dir_.string() + " already holds a run; pass --resume to continue it");
      }
      restore();
      if (state_.completed) return {0, "run already complete"};
    } else {
      initialize();
    }

    while (!state_.completed) {
      const int t = state_.iteration;
      const Phase phase = state_.phase;
      try {
        run_phase(t, phase);
      } catch (const ConfigError&) {
        throw;
      } catch (const std::exception& e) {
        state_.last_error = std::string(to_string(phase)) + " t=" + std::to_string(t) + ": " +
                            e.what();
        save_state();
        return {2, state_.last_error};
      }
      advance();
      save_state();
      if (options.halt_after && options.halt_after->first == t &&
          options.halt_after->second == phase) {
        return {2, "halted after " + std::string(to_string(phase)) + " t=" + std::to_string(t)};
      }
    }
    return {0, "completed " + std::to_string(cfg_.T) + " iterations"};
  }

 private:
  fs::path it_dir(int t) const { return iteration_dir(dir_, t); }

  json rng_json() const {
    return {{"seed", cfg_.seed}, {"config_hash", state_.config_hash}};
  }

  void save_state() const { write_file_atomic(dir_ / run_files::kState, dump(to_json(state_))); }

  void advance() {
    state_.last_error.clear();
    if (state_.phase != Phase::Propose) {
      state_.phase = kPhases[static_cast<int>(state_.phase) + 1];
      return;
    }
    state_.phase = Phase::Solve;
    if (++state_.iteration >= cfg_.T) state_.completed = true;
  }

  void initialize() {
    fs::create_directories(dir_);
    write_file_atomic(dir_ / run_files::kConfig, cfg_.snapshot_text());
    write_file_atomic(dir_ / run_files::kManifest,
                      dump({{"schema_version", kSchemaVersion},
                            {"config_hash", state_.config_hash},
                            {"verifier", {{"name", be_.verifier->name()},
                                          {"version", be_.verifier->version()}}},
                            {"solver_backend", be_.solver->name()},
                            {"proposer_backend", be_.proposer->name()},
                            {"trainer", be_.trainer->name()},
                            {"prompt_assets", prompts::asset_hashes()}}));

    if (cfg_.seeds.empty()) throw ConfigError("no seed specifications configured");
    std::vector<ProblemSpec> seeds;
    try {
      seeds = load_specs(cfg_.seeds);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(std::string("cannot load seed specs: ") + e.what());
    }
    json rejected = json::array();
    parallel_for(seeds.size(), cfg_.verifier.max_in_flight,
                 [&](std::size_t i) { check_spec_validity(*be_.verifier, seeds[i]); });
    for (const auto& s : seeds) {
      if (!s.validity.is_valid()) rejected.push_back({{"id", s.id}, {"reason", s.validity.reason}});
    }
    const std::size_t added = pool_.add_problems(seeds);
    write_file_atomic(dir_ / run_files::kSeeds,
                      dump({{"schema_version", kSchemaVersion},
                            {"read", seeds.size()},
                            {"added", added},
                            {"rejected", rejected}}));
    if (added == 0) throw ConfigError("no valid seed specifications in " + cfg_.seeds);

    ModelRef base = base_solver(cfg_);
    registry_.add(0, {base, std::nullopt});
    registry_.save(dir_ / run_files::kRegistry);
    snapshot(pool_, 0, cfg_.k_trn, it_dir(0), to_json(base), rng_json());
    state_.completed = cfg_.T == 0;
    save_state();
  }

  void restore() {
    const State saved = state_from_file(dir_ / run_files::kState);
    const auto snap_path = dir_ / run_files::kConfig;
    if (saved.config_hash != state_.config_hash || !fs::exists(snap_path) ||
        read_file(snap_path) != cfg_.snapshot_text()) {
      throw ConfigError("configuration differs from the one this run started with");
    }
    state_ = saved;
    state_.last_error.clear();
    if (state_.completed) return;
    pool_ = load_pool(it_dir(state_.iteration));
    pool_.drop_attempts_before(state_.iteration);
    registry_ = ModelRegistry::load(dir_ / run_files::kRegistry);
    const auto prop = dir_ / run_files::kProposer;
    if (fs::exists(prop)) {
      const json j = json::parse(read_file(prop));
      check_schema(j, prop);
      std::vector<ContextExample> ctx;
      for (const auto& e : j.at("frozen_context")) ctx.push_back(context_example_from_json(e));
      proposer_.frozen_context = std::move(ctx);
    }
  }

  void run_phase(int t, Phase phase) {
    switch (phase) {
      case Phase::Solve: return solve(t);
      case Phase::Train: return train(t);
      case Phase::Eval: return evaluate_phase(t);
      case Phase::Propose: return propose(t);
    }
  }

  void solve(int t) {
    const ModelRef& model = registry_.solver_for(t);
    pool_.drop_attempts_before(t);
    const auto& problems = pool_.problems();
    // The solve stream does not depend on t: the same draw is reused for a
    // problem across iterations, so only the model changes between passes.
    const std::uint64_t stream = derive_seed(cfg_.seed, "solve");
    std::vector<std::vector<std::string>> samples(problems.size());
    std::vector<double> latency(problems.size());
    const Clock& clock = default_clock();
    parallel_for(problems.size(), cfg_.generation.max_in_flight, [&](std::size_t i) {
      const double start = clock.now_seconds();
      samples[i] = sample_solutions(*be_.solver, model, problems[i], cfg_.k_trn, sampling_, stream,
                                    "solve/t=" + std::to_string(t) + "/" + problems[i].id);
      latency[i] = (clock.now_seconds() - start) / cfg_.k_trn;
    });
    std::vector<VerifyJob> jobs;
    for (std::size_t i = 0; i < problems.size(); ++i) {
      for (const auto& code : samples[i]) jobs.push_back({&problems[i], code});
    }
    const auto verdicts = verify_batch(*be_.verifier, jobs, cfg_.verifier.max_in_flight);
    std::vector<Attempt> attempts;
    attempts.reserve(jobs.size());
    for (std::size_t i = 0, n = 0; i < problems.size(); ++i) {
      for (int j = 0; j < cfg_.k_trn; ++j, ++n) {
        attempts.push_back({problems[i].id, t, j + 1, samples[i][j], verdicts[n], latency[i]});
      }
    }
    pool_.record_attempts(std::move(attempts));
    snapshot(pool_, t, cfg_.k_trn, it_dir(t), to_json(model), rng_json());
    write_pass_rates(it_dir(t) / pool_files::kPassRates, pool_.pass_table(t, cfg_.k_trn),
                     cfg_.k_trn, cfg_.tau_E, cfg_.tau_M);
  }

  void train(int t) {
    // A crash between saving the registry and the state leaves t+1 behind.
    if (registry_.has(t + 1)) {
      ModelRegistry trimmed;
      for (const auto& [it, entry] : registry_.entries()) {
        if (it <= t) trimmed.add(it, entry);
      }
      registry_ = std::move(trimmed);
    }
    const auto records = curate(pool_, t, cfg_.verification_on);
    const auto rft_path = it_dir(t) / run_files::kRft;
    const auto manifest = export_rft(records, t, rft_path, sampling_.solver_exemplar);
    if (cfg_.verification_on && cfg_.rft_spot_check > 0) {
      const auto failed =
          spot_check(records, pool_, *be_.verifier, cfg_.rft_spot_check,
                     derive_seed(derive_seed(cfg_.seed, "spot-check"), static_cast<std::uint64_t>(t)));
      if (!failed.empty()) throw Error("exported solution failed re-verification: " + failed.front());
    }
    const ModelRef& base = registry_.solver_for(0);
    // Nothing to learn from: the next solver is the base model again.
    ModelRef next = manifest.count == 0 ? base
                                        : be_.trainer->train(base, rft_path, manifest,
                                                             it_dir(t) / "model");
    register_model(registry_, manifest, std::move(next));
    registry_.save(dir_ / run_files::kRegistry);
  }

  const std::map<std::string, std::vector<ProblemSpec>>& held_out() {
    if (!held_out_) {
      held_out_.emplace();
      for (const auto& [name, path] : cfg_.eval_datasets) {
        auto specs = load_specs(path);
        for (auto& s : specs) check_spec_validity(*be_.verifier, s);
        std::erase_if(specs, [](const ProblemSpec& s) { return !s.validity.is_valid(); });
        (*held_out_)[name] = std::move(specs);
      }
    }
    return *held_out_;
  }

  void evaluate_phase(int t) {
    const auto table = pool_.pass_table(t, cfg_.k_trn);
    std::map<std::string, int> histogram;
    for (auto d : kAllDifficulties) histogram[std::string(to_string(d))] = 0;
    double all = 0.0, seed_sum = 0.0;
    int seed_count = 0;
    std::vector<ProblemSpec> seed_specs;
    for (const auto& p : pool_.problems()) {
      const double r = table.at(p.id).rate();
      all += r;
      ++histogram[std::string(to_string(difficulty(r, cfg_.tau_E, cfg_.tau_M)))];
      if (p.origin.kind == Origin::Kind::Seed) {
        seed_sum += r;
        ++seed_count;
        seed_specs.push_back(p);
      }
    }
    const auto manifest = rft_manifest_from_json(
        json::parse(read_file(manifest_path_for(it_dir(t) / run_files::kRft))));
    json m = {{"schema_version", kSchemaVersion},
              {"iteration", t},
              {"solver", registry_.solver_for(t).label},
              {"pool_size", pool_.size()},
              {"solve",
               {{"k_trn", cfg_.k_trn},
                {"mean_pass_rate", pool_.size() ? all / pool_.size() : 0.0},
                {"seed_pass_rate", seed_count ? seed_sum / seed_count : 0.0},
                {"difficulty_counts", histogram}}},
              {"rft", {{"count", manifest.count}, {"content_hash", manifest.content_hash}}},
              {"eval", nullptr}};
    if (cfg_.eval_enabled) {
      std::map<std::string, std::vector<ProblemSpec>> datasets = held_out();
      if (cfg_.eval_seed_set) datasets["seed"] = std::move(seed_specs);
      EvalOptions opt;
      opt.n = cfg_.eval_n;
      opt.ks = cfg_.eval_ks;
      opt.seed = cfg_.seed;
      opt.sampling = sampling_;
      opt.max_in_flight = cfg_.generation.max_in_flight;
      const ModelRef& model = registry_.solver_for(t + 1);
      m["evaluated_model"] = model.label;
      m["eval"] = psv::evaluate(datasets, *be_.solver, model, *be_.verifier, opt).to_json();
    }
    write_file_atomic(it_dir(t) / run_files::kMetrics, dump(m));
  }

  void propose(int t) {
    const auto buckets = bucketize(pool_, t, cfg_.k_trn, cfg_.tau_E, cfg_.tau_M);
    const bool had_frozen = proposer_.frozen_context.has_value();
    const auto batch = propose_batch(proposer_, pool_, buckets, *be_.proposer, proposer_model(cfg_),
                                     *be_.verifier, t, cfg_.B, cfg_.proposer.max_in_flight);
    std::vector<json> records;
    for (const auto& r : batch.records) records.push_back(to_json(r));
    write_jsonl(it_dir(t) / run_files::kProposals, records);

    json alloc = json::object();
    for (const auto& [d, n] : allocate_budget(cfg_.B, cfg_.targets)) alloc[std::string(to_string(d))] = n;
    json prompts = json::array();
    for (const auto& [target, messages] : batch.prompts) {
      json msgs = json::array();
      for (const auto& m : messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
      prompts.push_back({{"target", std::string(to_string(target))},
                         {"prompt_hash", prompt_hash(messages)},
                         {"messages", msgs}});
    }
    json bucket_sizes = json::object();
    for (const auto& [d, ids] : buckets) bucket_sizes[std::string(to_string(d))] = ids.size();
    const std::size_t before = pool_.size();
    pool_.add_problems(batch.accepted);
    write_file_atomic(it_dir(t) / run_files::kProposalSummary,
                      dump({{"schema_version", kSchemaVersion},
                            {"iteration", t},
                            {"budget", cfg_.B},
                            {"allocation", alloc},
                            {"buckets", bucket_sizes},
                            {"metrics", to_json(batch.metrics)},
                            {"added", pool_.size() - before},
                            {"prompts", prompts}}));
    if (proposer_.frozen_context && !had_frozen) {
      json ctx = json::array();
      for (const auto& e : *proposer_.frozen_context) ctx.push_back(to_json(e));
      write_file_atomic(dir_ / run_files::kProposer,
                        dump({{"schema_version", kSchemaVersion}, {"frozen_context", ctx}}));
    }
    pool_.drop_attempts_before(t + 1);
    snapshot(pool_, t + 1, cfg_.k_trn, it_dir(t + 1), to_json(registry_.solver_for(t + 1)),
             rng_json());
  }

  const RunConfig& cfg_;
  fs::path dir_;
  const RunBackends& be_;
  SamplingConfig sampling_;
  ProposerState proposer_;
  DataPool pool_;
  ModelRegistry registry_;
  State state_;
  std::optional<std::map<std::string, std::vector<ProblemSpec>>> held_out_;
};

}  // namespace

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::Solve: return "solve";
    case Phase::Train: return "train";
    case Phase::Eval: return "eval";
    case Phase::Propose: return "propose";
  }
  return "?";
}

Phase phase_from_string(std::string_view s) {
  for (auto p : kPhases) {
    if (to_string(p) == s) return p;
  }
  throw SchemaError("unknown phase " + std::string(s));
}

RunBackends make_backends(const RunConfig& c) {
  RunBackends b;
  b.solver = make_generation(c.generation, c);
  b.proposer = make_generation(c.proposer, c);
  std::shared_ptr<const VerificationBackend> inner;
  if (c.verifier.kind == "toy") {
    inner = std::make_shared<ToyOracleBackend>();
  } else {
    VerusOptions o;
    o.binary = resolve_verus_binary(c.verifier.binary);
    o.timeout_seconds = c.verifier.timeout_seconds;
    o.extra_args = c.verifier.extra_args;
    inner = std::make_shared<VerusBackend>(o);
  }
  b.verifier = std::make_shared<CachingVerifier>(inner);
  if (c.trainer_command.empty()) {
    ToySolverState s;
    s.p0 = c.toy_p0;
    s.gamma = c.toy_gamma;
    b.trainer = std::make_shared<MockTrainer>(s);
  } else {
    b.trainer = std::make_shared<CommandTrainer>(c.trainer_command, c.trainer_timeout_seconds);
  }
  return b;
}

ModelRef base_solver(const RunConfig& c) {
  ModelRef m = ModelRef::base(c.generation.model);
  if (c.generation.kind != "http") m.endpoint.clear();
  if (c.generation.kind == "toy") {
    ToySolverState s;
    s.p0 = c.toy_p0;
    s.gamma = c.toy_gamma;
    m.params = s.to_json();
  }
  return m;
}

ModelRef proposer_model(const RunConfig& c) {
  ModelRef m = ModelRef::base(c.proposer.model);
  m.label = "proposer";
  if (c.proposer.endpoint != c.generation.endpoint) m.endpoint = c.proposer.endpoint;
  return m;
}

std::vector<ProblemSpec> load_specs(const fs::path& path) {
  std::vector<std::pair<std::string, std::string>> raw;  // source, text
  if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(path)) {
      if (e.is_regular_file() && e.path().extension() == ".rs") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) raw.emplace_back(f.string(), read_file(f));
  } else if (path.extension() == ".jsonl") {
    int line = 0;
    for (const auto& j : read_jsonl(path)) {
      ++line;
      const char* key = j.contains("text") ? "text" : "spec";
      if (!j.contains(key) || !j[key].is_string()) {
        throw SchemaError(path.string() + ":" + std::to_string(line) + ": missing \"text\"");
      }
      raw.emplace_back(path.string() + ":" + std::to_string(line), j[key].get<std::string>());
    }
  } else if (fs::is_regular_file(path)) {
    raw.emplace_back(path.string(), read_file(path));
  } else {
    throw Error("no such spec source: " + path.string());
  }
  std::vector<ProblemSpec> out;
  for (const auto& [source, text] : raw) {
    try {
      out.push_back(ProblemSpec::from_text(specpipe::extract_spec(text), Origin::seed()));
    } catch (const specpipe::SpecError& e) {
      throw Error(source + ": " + e.what());
    }
  }
  return out;
}

fs::path iteration_dir(const fs::path& run_dir, int t) {
  return run_dir / run_files::kIterations / std::to_string(t);
}

RunResult run(const RunConfig& config, const fs::path& run_dir, const RunBackends& backends,
              const RunOptions& options) {
  try {
    Loop loop(config, run_dir, backends);
    return loop.run(options);
  } catch (const ConfigError& e) {
    return {3, e.what()};
  } catch (const std::exception& e) {
    return {2, e.what()};
  }
}

RunResult run_seeds(const RunConfig& config, const fs::path& run_dir, int seeds,
                    const RunOptions& options) {
  RunBackends backends;
  try {
    if (seeds < 1) throw ConfigError("--seeds must be >= 1");
    if (seeds == 1) {
      backends = make_backends(config);
      return run(config, run_dir, backends, options);
    }
  } catch (const ConfigError& e) {
    return {3, e.what()};
  } catch (const std::exception& e) {
    return {2, e.what()};
  }
  for (int i = 0; i < seeds; ++i) {
    RunConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(i);
    try {
      backends = make_backends(c);
    } catch (const ConfigError& e) {
      return {3, e.what()};
    } catch (const std::exception& e) {
      return {2, e.what()};
    }
    const auto r = run(c, run_dir / ("seed_" + std::to_string(i)), backends, options);
    if (r.exit_code != 0) return {r.exit_code, "seed " + std::to_string(i) + ": " + r.message};
  }
  if (!config.eval_enabled) return {0, "completed " + std::to_string(seeds) + " seeds"};
  json per_iteration = json::object();
  try {
    for (int t = 0; t < config.T; ++t) {
      std::vector<MetricsTable> tables;
      for (int i = 0; i < seeds; ++i) {
        const auto path =
            iteration_dir(run_dir / ("seed_" + std::to_string(i)), t) / run_files::kMetrics;
        tables.push_back(MetricsTable::from_json(json::parse(read_file(path)).at("eval")));
      }
      per_iteration[std::to_string(t)] = to_json(aggregate_seeds(tables));
    }
    write_file_atomic(run_dir / run_files::kAggregate,
                      dump({{"schema_version", kSchemaVersion},
                            {"seeds", seeds},
                            {"iterations", per_iteration}}));
  } catch (const std::exception& e) {
    return {2, std::string("aggregation failed: ") + e.what()};
  }
  return {0, "completed " + std::to_string(seeds) + " seeds"};
}

}  // namespace psv
