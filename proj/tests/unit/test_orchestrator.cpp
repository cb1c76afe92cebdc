#include <doctest.h>

#include "../support/toy_run.hpp"
#include "helpers.hpp"
#include "psv/orchestrator.hpp"

using namespace psv;

namespace {

struct ToyRun {
  testing::TempDir dir;
  RunConfig config;
  explicit ToyRun(const json& overrides = json::object())
      : config(RunConfig::load(fixture::write_toy_run(dir.path(), overrides))) {}
  fs::path run_dir() const { return dir / "run"; }
  RunResult go(const RunOptions& opt = {}) {
    const auto b = make_backends(config);
    return run(config, run_dir(), b, opt);
  }
};

// Fails every request once it has seen `budget` calls.
class FlakyBackend final : public GenerationBackend {
 public:
  FlakyBackend(std::shared_ptr<const GenerationBackend> inner, int budget)
      : inner_(std::move(inner)), budget_(budget) {}
  std::string name() const override { return inner_->name(); }
  std::vector<std::string> generate(const ModelRef& m, const GenerationRequest& r) const override {
    if (calls_++ >= budget_) throw BackendError("endpoint down");
    return inner_->generate(m, r);
  }

 private:
  std::shared_ptr<const GenerationBackend> inner_;
  int budget_;
  mutable std::atomic<int> calls_{0};
};

}  // namespace

TEST_CASE("a toy run writes the documented layout") {
  ToyRun r;
  const auto res = r.go();
  REQUIRE_MESSAGE(res.exit_code == 0, res.message);
  const auto root = r.run_dir();
  CHECK(read_file(root / "config.snapshot") == r.config.snapshot_text());
  for (int t = 0; t < 3; ++t) {
    const auto it = iteration_dir(root, t);
    for (const char* f : {"problems.jsonl", "attempts.jsonl", "pass_rates.json", "rft.jsonl",
                          "rft.manifest.json", "metrics.json", "snapshot.json", "proposals.jsonl",
                          "proposals.json"}) {
      CHECK_MESSAGE(fs::exists(it / f), (it / f).string());
    }
    for (const auto& rec : read_jsonl(it / "attempts.jsonl")) {
      CHECK(rec["schema_version"] == kSchemaVersion);
      CHECK(rec["iteration"] == t);
    }
    const auto summary = json::parse(read_file(it / "proposals.json"));
    CHECK(summary["metrics"]["requested"] == 8);
  }
  CHECK(fs::exists(iteration_dir(root, 3) / "problems.jsonl"));
  const auto state = json::parse(read_file(root / "state.json"));
  CHECK(state["completed"] == true);
  const auto reg = ModelRegistry::load(root / "registry.json");
  for (int t = 0; t <= 3; ++t) CHECK(reg.has(t));
  const auto manifest = json::parse(read_file(root / "run.json"));
  CHECK(manifest["verifier"]["version"] == "toy-oracle 1");
  CHECK(manifest["prompt_assets"].size() == 3);
}

TEST_CASE("resume after a halt reproduces the uninterrupted run") {
  ToyRun whole;
  REQUIRE(whole.go().exit_code == 0);

  ToyRun parts;
  RunOptions halt;
  halt.halt_after = {{1, Phase::Solve}};
  CHECK(parts.go(halt).exit_code == 2);
  const auto state = json::parse(read_file(parts.run_dir() / "state.json"));
  CHECK(state["next_iteration"] == 1);
  CHECK(state["next_phase"] == "train");
  RunOptions resume;
  resume.resume = true;
  halt.resume = true;
  halt.halt_after = {{2, Phase::Propose}};
  CHECK(parts.go(halt).exit_code == 2);
  CHECK(parts.go(resume).exit_code == 0);

  // Same content apart from timing fields and the differing absolute paths
  // of the two config directories.
  auto a = fixture::read_tree(whole.run_dir());
  auto b = fixture::read_tree(parts.run_dir());
  a.erase("config.snapshot");
  b.erase("config.snapshot");
  a.erase("state.json");
  b.erase("state.json");
  a.erase("run.json");
  b.erase("run.json");
  for (int t = 0; t <= 3; ++t) {
    a.erase("iterations/" + std::to_string(t) + "/snapshot.json");
    b.erase("iterations/" + std::to_string(t) + "/snapshot.json");
  }
  REQUIRE(a.size() == b.size());
  for (const auto& [path, content] : a) CHECK_MESSAGE(b.at(path) == content, path);
}

TEST_CASE("resuming a completed run is a no-op") {
  ToyRun r;
  REQUIRE(r.go().exit_code == 0);
  const auto before = fixture::read_tree(r.run_dir());
  RunOptions resume;
  resume.resume = true;
  const auto again = r.go(resume);
  CHECK(again.exit_code == 0);
  CHECK(fixture::read_tree(r.run_dir()) == before);
}

TEST_CASE("resume with a changed config is refused") {
  ToyRun r;
  RunOptions halt;
  halt.halt_after = {{0, Phase::Train}};
  REQUIRE(r.go(halt).exit_code == 2);
  auto changed = r.config;
  changed.B = 4;
  RunOptions resume;
  resume.resume = true;
  const auto b = make_backends(changed);
  const auto res = run(changed, r.run_dir(), b, resume);
  CHECK(res.exit_code == 3);
  CHECK(res.message.find("configuration") != std::string::npos);
}

TEST_CASE("starting over an existing run needs --resume") {
  ToyRun r;
  RunOptions halt;
  halt.halt_after = {{0, Phase::Solve}};
  REQUIRE(r.go(halt).exit_code == 2);
  CHECK(r.go().exit_code == 3);
}

TEST_CASE("backend failure leaves a resumable run") {
  ToyRun r;
  auto b = make_backends(r.config);
  const auto healthy = b.solver;
  // 8 seeds solved at t=0 plus 8 eval requests, then the endpoint dies.
  b.solver = std::make_shared<FlakyBackend>(healthy, 16);
  const auto res = run(r.config, r.run_dir(), b);
  CHECK(res.exit_code == 2);
  CHECK(res.message.find("endpoint down") != std::string::npos);
  const auto state = json::parse(read_file(r.run_dir() / "state.json"));
  CHECK(state["next_iteration"] == 1);
  CHECK(state["next_phase"] == "solve");
  CHECK(state.contains("last_error"));
  b.solver = healthy;
  RunOptions resume;
  resume.resume = true;
  CHECK(run(r.config, r.run_dir(), b, resume).exit_code == 0);
  CHECK_FALSE(json::parse(read_file(r.run_dir() / "state.json")).contains("last_error"));
}

TEST_CASE("one iteration with no budget is plain rejection fine-tuning") {
  ToyRun r(json{{"T", 1}, {"B", 0}});
  REQUIRE(r.go().exit_code == 0);
  const auto x0 = read_jsonl(iteration_dir(r.run_dir(), 0) / "problems.jsonl");
  const auto x1 = read_jsonl(iteration_dir(r.run_dir(), 1) / "problems.jsonl");
  CHECK(x0 == x1);
  CHECK(read_jsonl(iteration_dir(r.run_dir(), 0) / "proposals.jsonl").empty());
  CHECK(fs::exists(iteration_dir(r.run_dir(), 0) / "rft.jsonl"));
}

TEST_CASE("the trainer command hook is used when configured") {
  ToyRun r(json{{"T", 1},
            {"B", 0},
            {"trainer.command", {testing::data("fake_finetune.sh").string()}}});
  REQUIRE(r.go().exit_code == 0);
  const auto reg = ModelRegistry::load(r.run_dir() / "registry.json");
  CHECK(reg.solver_for(1).id.find("toy-solver-ft-") == 0);
  CHECK(fs::exists(iteration_dir(r.run_dir(), 0) / "model" / "manifest.json"));
}

TEST_CASE("bad seed sources are configuration errors") {
  ToyRun r(json{{"seeds", "missing.jsonl"}});
  CHECK(r.go().exit_code == 3);
}

TEST_CASE("seed specs load from a directory of sources") {
  const auto specs = load_specs(testing::data("toy_seeds"));
  REQUIRE(specs.size() == 2);
  CHECK(specs[0].text.find("fn inc") == 0);
  CHECK(specs[1].text.find("x * 2\n}") == std::string::npos);  // body dropped
}

TEST_CASE("several seeds aggregate into one table") {
  testing::TempDir dir;
  auto cfg = RunConfig::load(fixture::write_toy_run(dir.path(), {{"T", 2}}));
  const auto res = run_seeds(cfg, dir / "multi", 3);
  REQUIRE_MESSAGE(res.exit_code == 0, res.message);
  const auto agg = json::parse(read_file(dir / "multi" / "aggregate.json"));
  CHECK(agg["seeds"] == 3);
  CHECK(agg["iterations"]["1"]["seed"]["1"].contains("std_err"));
  CHECK(fs::exists(dir / "multi" / "seed_2" / "state.json"));
}
