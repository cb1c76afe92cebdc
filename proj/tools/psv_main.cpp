// psv: command-line entry point for the self-play engine.
#include <iostream>
#include <iterator>

#include <CLI11.hpp>

#include "psv/config.hpp"
#include "psv/eval.hpp"
#include "psv/orchestrator.hpp"
#include "psv/proposer.hpp"
#include "psv/rft.hpp"
#include "psv/specpipe.hpp"
#include "psv/verus_backend.hpp"

namespace fs = std::filesystem;
using psv::json;

namespace {

std::string read_stdin() {
  return {std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>()};
}

psv::RunConfig config_from_run(const fs::path& run_dir) {
  const auto path = run_dir / psv::run_files::kConfig;
  if (!fs::exists(path)) throw psv::ConfigError("no " + path.string());
  return psv::RunConfig::from_json(json::parse(psv::read_file(path)));
}

std::shared_ptr<const psv::VerificationBackend> make_verifier(const std::string& kind,
                                                              const std::string& binary,
                                                              double timeout) {
  if (kind == "toy") return std::make_shared<psv::ToyOracleBackend>();
  psv::VerusOptions o;
  o.binary = psv::resolve_verus_binary(binary);
  o.timeout_seconds = timeout;
  return std::make_shared<psv::VerusBackend>(o);
}

int cmd_verify(const std::string& spec_file, const std::string& code_file,
               const std::string& kind, const std::string& binary, double timeout) {
  const auto spec = psv::ProblemSpec::from_text(
      psv::specpipe::extract_spec(psv::read_file(spec_file)), psv::Origin::seed());
  const auto verifier = make_verifier(kind, binary, timeout);
  const auto verdict = code_file.empty()
                           ? verifier->verify_spec_only(spec)
                           : verifier->verify_solution(spec, psv::read_file(code_file));
  std::cout << psv::to_string(verdict.status) << "\n";
  if (!verdict.diagnostics.empty()) std::cout << verdict.diagnostics << "\n";
  return verdict.verified() ? 0 : 1;
}

int cmd_spec(const std::string& action) {
  const std::string in = read_stdin();
  if (action == "extract") {
    std::cout << psv::specpipe::extract_spec(in) << "\n";
  } else if (action == "stub") {
    std::cout << psv::specpipe::make_stub(psv::specpipe::extract_spec(in));
  } else {
    std::cout << psv::specpipe::normalize(in) << "\n";
  }
  return 0;
}

int cmd_propose(const fs::path& run_dir, int t, int budget, bool no_labels, bool frozen) {
  auto cfg = config_from_run(run_dir);
  if (no_labels) cfg.difficulty_labels_on = false;
  if (frozen) cfg.context_resampling_on = false;
  const auto backends = psv::make_backends(cfg);
  const auto dir = psv::iteration_dir(run_dir, t);
  const auto pool = psv::load_pool(dir);
  const auto buckets = psv::bucketize(pool, t, cfg.k_trn, cfg.tau_E, cfg.tau_M);

  psv::ProposerState state;
  state.config.k_prop = cfg.k_prop;
  state.config.tau_easy = cfg.tau_E;
  state.config.tau_medium = cfg.tau_M;
  state.config.difficulty_labels_on = cfg.difficulty_labels_on;
  state.config.context_resampling_on = cfg.context_resampling_on;
  state.config.targets = cfg.targets;
  state.config.seed = cfg.seed;
  state.config.sampling.temperature = cfg.proposer.temperature;
  state.config.sampling.max_tokens = cfg.proposer.max_tokens;
  const auto frozen_path = run_dir / psv::run_files::kProposer;
  if (!cfg.context_resampling_on && fs::exists(frozen_path)) {
    std::vector<psv::ContextExample> ctx;
    const json saved = json::parse(psv::read_file(frozen_path));
    for (const auto& e : saved.at("frozen_context")) {
      ctx.push_back(psv::context_example_from_json(e));
    }
    state.frozen_context = std::move(ctx);
  }
  const auto batch = psv::propose_batch(state, pool, buckets, *backends.proposer,
                                        psv::proposer_model(cfg), *backends.verifier, t, budget,
                                        cfg.proposer.max_in_flight);
  std::vector<json> accepted, records;
  for (const auto& p : batch.accepted) accepted.push_back(psv::to_json(p));
  for (const auto& r : batch.records) records.push_back(psv::to_json(r));
  psv::write_jsonl(dir / "proposed.jsonl", accepted);
  psv::write_jsonl(dir / "proposed.records.jsonl", records);
  std::cout << psv::to_json(batch.metrics).dump() << "\n";
  return 0;
}

int cmd_export_rft(const fs::path& run_dir, int t, const std::string& out) {
  const auto cfg = config_from_run(run_dir);
  const auto dir = psv::iteration_dir(run_dir, t);
  const auto pool = psv::load_pool(dir);
  std::string exemplar;
  if (!cfg.solver_exemplar.empty()) exemplar = psv::read_file(cfg.solver_exemplar);
  const auto records = psv::curate(pool, t, cfg.verification_on);
  const fs::path path = out.empty() ? dir / psv::run_files::kRft : fs::path(out);
  const auto manifest = psv::export_rft(records, t, path, exemplar);
  std::cout << psv::to_json(manifest).dump() << "\n";
  return 0;
}

psv::ModelRef parse_model_ref(const std::string& ref) {
  if (fs::is_regular_file(ref)) return psv::model_from_json(json::parse(psv::read_file(ref)));
  return psv::ModelRef::base(ref);
}

int cmd_eval(const std::string& dataset, const std::string& model_ref, int n,
             const std::string& ks_text, int seeds, const std::string& config_file,
             const std::string& out) {
  psv::RunConfig cfg;
  if (!config_file.empty()) cfg = psv::RunConfig::load(config_file);
  std::vector<int> ks;
  for (const auto& part : psv::split(ks_text, ',')) {
    if (!psv::trim(part).empty()) ks.push_back(std::stoi(part));
  }
  cfg.eval_n = n;
  cfg.eval_ks = ks;
  cfg.validate();
  if (seeds < 1) throw psv::ConfigError("--seeds must be >= 1");

  const auto backends = psv::make_backends(cfg);
  auto specs = psv::load_specs(dataset);
  for (auto& s : specs) psv::check_spec_validity(*backends.verifier, s);
  std::erase_if(specs, [](const psv::ProblemSpec& s) { return !s.validity.is_valid(); });
  const std::string name = fs::path(dataset).filename().string();
  std::map<std::string, std::vector<psv::ProblemSpec>> datasets{{name, specs}};
  psv::ModelRef model = parse_model_ref(model_ref);
  if (cfg.generation.kind == "toy" && !model.params.contains("trained")) {
    model.params = psv::base_solver(cfg).params;
  }

  std::vector<psv::MetricsTable> tables;
  json per_seed = json::array();
  for (int i = 0; i < seeds; ++i) {
    psv::EvalOptions opt;
    opt.n = n;
    opt.ks = ks;
    opt.seed = cfg.seed + static_cast<std::uint64_t>(i);
    opt.sampling.temperature = cfg.generation.temperature;
    opt.sampling.max_tokens = cfg.generation.max_tokens;
    if (!cfg.solver_exemplar.empty()) opt.sampling.solver_exemplar = psv::read_file(cfg.solver_exemplar);
    opt.max_in_flight = cfg.generation.max_in_flight;
    tables.push_back(psv::evaluate(datasets, *backends.solver, model, *backends.verifier, opt));
    per_seed.push_back(tables.back().to_json());
  }
  const json result = {{"schema_version", psv::kSchemaVersion},
                       {"model", model.label},
                       {"seeds", per_seed},
                       {"aggregate", psv::to_json(psv::aggregate_seeds(tables))}};
  if (out.empty()) {
    std::cout << result.dump(2) << "\n";
  } else {
    psv::write_file_atomic(out, result.dump(2) + "\n");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Propose-solve-verify self-play engine"};
  app.require_subcommand(1);

  std::string spec_file, code_file, verifier_kind = "verus", verus_bin;
  double timeout = 60.0;
  auto* verify = app.add_subcommand("verify", "Verify a spec alone or a solution against it");
  verify->add_option("--spec", spec_file, "Specification file")->required();
  verify->add_option("--code", code_file, "Candidate program");
  verify->add_option("--verifier", verifier_kind, "verus or toy")
      ->check(CLI::IsMember({"verus", "toy"}));
  verify->add_option("--verus-bin", verus_bin, "Verus executable");
  verify->add_option("--timeout", timeout, "Seconds per check");

  std::string spec_action;
  auto* spec = app.add_subcommand("spec", "Spec pipeline filters (stdin to stdout)");
  spec->add_option("action", spec_action, "extract, stub or canon")
      ->required()
      ->check(CLI::IsMember({"extract", "stub", "canon"}));

  std::string run_dir = "run";
  int iteration = 0, budget = 0;
  bool no_labels = false, frozen = false;
  auto* propose = app.add_subcommand("propose", "Propose specs for one iteration");
  propose->add_option("--run-dir", run_dir, "Run directory");
  propose->add_option("--iteration", iteration)->required();
  propose->add_option("--budget", budget)->required();
  propose->add_flag("--no-difficulty-labels", no_labels);
  propose->add_flag("--frozen-context", frozen);

  std::string rft_out;
  auto* export_rft = app.add_subcommand("export-rft", "Write the RFT file for one iteration");
  export_rft->add_option("--run-dir", run_dir, "Run directory");
  export_rft->add_option("--iteration", iteration)->required();
  export_rft->add_option("--out", rft_out, "Output path (default: the iteration directory)");

  std::string dataset, model_ref, ks = "1,5,10", config_file, eval_out;
  int n = 100, seeds = 1;
  auto* eval = app.add_subcommand("eval", "pass@k of a model on a spec dataset");
  eval->add_option("--dataset", dataset, "Directory of .rs specs or a .jsonl file")->required();
  eval->add_option("--model", model_ref, "Model id or ModelRef JSON file")->required();
  eval->add_option("--n", n);
  eval->add_option("--k", ks);
  eval->add_option("--seeds", seeds);
  eval->add_option("--config", config_file, "Backend configuration");
  eval->add_option("--out", eval_out, "Write metrics here instead of stdout");

  bool resume = false;
  auto* run = app.add_subcommand("run", "Run the self-play loop");
  run->add_option("--config", config_file)->required();
  run->add_option("--run-dir", run_dir, "Run directory");
  run->add_flag("--resume", resume);
  run->add_option("--seeds", seeds);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*verify) return cmd_verify(spec_file, code_file, verifier_kind, verus_bin, timeout);
    if (*spec) return cmd_spec(spec_action);
    if (*propose) return cmd_propose(run_dir, iteration, budget, no_labels, frozen);
    if (*export_rft) return cmd_export_rft(run_dir, iteration, rft_out);
    if (*eval) return cmd_eval(dataset, model_ref, n, ks, seeds, config_file, eval_out);
    if (*run) {
      psv::RunConfig cfg;
      try {
        cfg = psv::RunConfig::load(config_file);
      } catch (const psv::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 3;
      }
      psv::RunOptions opt;
      opt.resume = resume;
      const auto r = psv::run_seeds(cfg, run_dir, seeds, opt);
      (r.exit_code == 0 ? std::cout : std::cerr) << r.message << "\n";
      return r.exit_code;
    }
  } catch (const psv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
