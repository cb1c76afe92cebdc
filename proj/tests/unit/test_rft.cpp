#include <doctest.h>

#include "../support/toy_run.hpp"
#include "helpers.hpp"
#include "psv/rft.hpp"
#include "psv/specpipe.hpp"

using namespace psv;

namespace {

struct Fixture {
  DataPool pool;
  ProblemSpec a, b, c;
  Fixture() {
    auto mk = [](const std::string& name, const std::string& expr) {
      auto p = ProblemSpec::from_text(fixture::toy_spec(name, 0, 4, expr), Origin::seed());
      p.validity = Validity::valid();
      return p;
    };
    a = mk("a", "x + 1");
    b = mk("b", "x * 2");
    c = mk("c", "x * x");
    pool.add_problems({a, b, c});
    // a: verified at samples 3 and 7; b: never; c: only sample 5.
    for (int j = 1; j <= 8; ++j) {
      add(a, j, j == 3 || j == 7, "x + 1");
      add(b, j, false, "x");
      add(c, j, j == 5, "x * x");
    }
  }
  void add(const ProblemSpec& p, int j, bool ok, const std::string& right) {
    const auto body = ok ? right : right + " + 1";
    pool.record_attempt({p.id, 0, j, specpipe::assemble_program(p.text, body),
                         ok ? VerifierVerdict::verified_in(0) : VerifierVerdict::rejected("r"), 0});
  }
};

}  // namespace

TEST_CASE("curation keeps the lowest verified sample per problem") {
  Fixture f;
  const auto recs = curate(f.pool, 0, true);
  REQUIRE(recs.size() == 2);
  CHECK(recs[0].problem_id == f.a.id);
  CHECK(recs[0].sample_index == 3);
  CHECK(recs[1].problem_id == f.c.id);
  CHECK(recs[1].sample_index == 5);
}

TEST_CASE("curation without verification takes every first attempt") {
  Fixture f;
  const auto recs = curate(f.pool, 0, false);
  REQUIRE(recs.size() == 3);
  for (const auto& r : recs) CHECK(r.sample_index == 1);
}

TEST_CASE("curation of an unsolved pool is empty") {
  Fixture f;
  CHECK(curate(f.pool, 5, true).empty());
}

TEST_CASE("export writes prompt/completion pairs and a manifest") {
  testing::TempDir dir;
  Fixture f;
  const auto recs = curate(f.pool, 0, true);
  const auto path = dir / "rft.jsonl";
  const auto m = export_rft(recs, 0, path, "EXEMPLAR");
  CHECK(m.count == 2);
  CHECK(m.content_hash == sha256_hex(read_file(path)));
  CHECK(manifest_path_for(path) == dir / "rft.manifest.json");
  CHECK(rft_manifest_from_json(json::parse(read_file(dir / "rft.manifest.json"))) == m);
  const auto lines = read_jsonl(path);
  REQUIRE(lines.size() == 2);
  for (const auto& l : lines) {
    CHECK(l["schema_version"] == kSchemaVersion);
    CHECK(l["prompt"].back()["content"].get<std::string>().find("EXEMPLAR") != std::string::npos);
    CHECK(l["completion"][0]["role"] == "assistant");
    const auto code = specpipe::first_code_block(l["completion"][0]["content"].get<std::string>());
    CHECK(ToyOracleBackend().verify_solution(ProblemSpec::from_text(l["spec"], Origin::seed()), code)
              .verified());
  }
}

TEST_CASE("empty export still writes a manifest") {
  testing::TempDir dir;
  const auto m = export_rft({}, 4, dir / "rft.jsonl");
  CHECK(m.count == 0);
  CHECK(read_file(dir / "rft.jsonl").empty());
  CHECK(fs::exists(dir / "rft.manifest.json"));
}

TEST_CASE("spot check finds tampered records") {
  Fixture f;
  auto recs = curate(f.pool, 0, true);
  ToyOracleBackend v;
  CHECK(spot_check(recs, f.pool, v, 10, 1).empty());
  recs[1].solution = specpipe::assemble_program(f.c.text, "x");
  CHECK(spot_check(recs, f.pool, v, 10, 1) == std::vector<std::string>{f.c.id});
}

TEST_CASE("registry") {
  testing::TempDir dir;
  ModelRegistry reg;
  reg.add(0, {ModelRef::base("base"), std::nullopt});
  CHECK_THROWS(reg.add(0, {ModelRef::base("base"), std::nullopt}));
  CHECK_THROWS(reg.solver_for(1));
  RftManifest m{3, "h", 0, "rft.jsonl"};
  const auto registered = register_model(reg, m, ModelRef::base("ft"));
  CHECK(registered.label == "solver@t=1");
  CHECK(reg.solver_for(1).id == "ft");
  reg.save(dir / "registry.json");
  const auto back = ModelRegistry::load(dir / "registry.json");
  CHECK(back.solver_for(1) == reg.solver_for(1));
  CHECK(back.entries().at(1).trained_on == m);
}

TEST_CASE("mock trainer restarts from the base state") {
  testing::TempDir dir;
  Fixture f;
  const auto path = dir / "rft.jsonl";
  const auto m = export_rft(curate(f.pool, 0, true), 0, path);
  ModelRef base = ModelRef::base("toy");
  base.params = ToySolverState{}.to_json();
  MockTrainer trainer;
  const auto once = trainer.train(base, path, m, dir / "out");
  const auto state = ToySolverState::from_json(once.params);
  CHECK(state.trained.at(toy::ToySpec::parse(f.a.text).family()) == 1);
  CHECK(once.provenance == ModelRef::Provenance::Finetuned);
  CHECK(once.iteration == 1);
  // Training the same data from the base again gives the same state.
  CHECK(trainer.train(base, path, m, dir / "out").params == once.params);
}

TEST_CASE("command trainer runs the hook and reads its manifest") {
  testing::TempDir dir;
  Fixture f;
  const auto path = dir / "rft.jsonl";
  const auto m = export_rft(curate(f.pool, 0, true), 0, path);
  CommandTrainer trainer({testing::data("fake_finetune.sh").string()}, 10);
  const auto model = trainer.train(ModelRef::base("qwen"), path, m, dir / "model");
  CHECK(model.id == "qwen-ft-2");
  CHECK(model.provenance == ModelRef::Provenance::Finetuned);
  CommandTrainer broken({"sh", "-c", "exit 4", "x"}, 10);
  CHECK_THROWS(broken.train(ModelRef::base("q"), path, m, dir / "m2"));
}
