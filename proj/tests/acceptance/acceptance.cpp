// Acceptance checks: one PASS/FAIL/SKIP line per criterion. Exit status is
// nonzero when any criterion fails.
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <regex>
#include <set>

#include "psv/datapool.hpp"
#include "psv/eval.hpp"
#include "psv/orchestrator.hpp"
#include "psv/proposer.hpp"
#include "psv/specpipe.hpp"
#include "psv/verus_backend.hpp"
#include "../support/oracles.hpp"
#include "../support/toy_run.hpp"

using namespace psv;

namespace {

struct Outcome {
  enum { Pass, Fail, Skip } kind = Pass;
  std::string detail;
};

Outcome fail(std::string why) { return {Outcome::Fail, std::move(why)}; }
Outcome skip(std::string why) { return {Outcome::Skip, std::move(why)}; }

fs::path scratch_root() {
  auto p = fs::temp_directory_path() / ("psv_acceptance_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

json read_json(const fs::path& p) { return json::parse(read_file(p)); }

RunResult run_toy(const fs::path& dir, const json& overrides = json::object()) {
  const auto cfg_path = fixture::write_toy_run(dir, overrides);
  const auto cfg = RunConfig::load(cfg_path);
  const auto backends = make_backends(cfg);
  return run(cfg, dir / "run", backends);
}

Outcome pass_at_k_exactness() {
  for (int n = 1; n <= 12; ++n) {
    for (int c = 0; c <= n; ++c) {
      for (int k = 1; k <= n; ++k) {
        const double got = pass_at_k(n, c, k);
        const double want = oracle::brute_pass_at_k(n, c, k);
        if (std::abs(got - want) > 1e-12) {
          return fail("n=" + std::to_string(n) + " c=" + std::to_string(c) +
                      " k=" + std::to_string(k));
        }
      }
      if (pass_at_k(n, c, 1) != static_cast<double>(c) / n) {
        return fail("pass@1 != c/n at n=" + std::to_string(n) + " c=" + std::to_string(c));
      }
    }
  }
  return {};
}

Outcome difficulty_conformance() {
  auto expect = [](double r) {
    if (r >= 0.8) return Difficulty::Easy;
    if (r >= 0.2) return Difficulty::Medium;
    if (r > 0.0) return Difficulty::Hard;
    return Difficulty::Impossible;
  };
  for (int i = 0; i <= 100; ++i) {
    const double r = i / 100.0;
    if (difficulty(r, 0.8, 0.2) != expect(r)) return fail("r=" + std::to_string(r));
  }
  if (difficulty(0.2, 0.8, 0.2) != Difficulty::Medium) return fail("r=0.2");
  if (difficulty(0.8, 0.8, 0.2) != Difficulty::Easy) return fail("r=0.8");
  if (difficulty(0.0, 0.8, 0.2) != Difficulty::Impossible) return fail("r=0");
  return {};
}

const char* kMaxElementFull = R"(use vstd::prelude::*;

verus! {

fn max_element(a: &Vec<i32>) -> (max: i32)
    requires
        a.len() > 0,
    ensures
        forall|i: int| 0 <= i < a.len() ==> a[i] <= max,
        exists|i: int| 0 <= i < a.len() && a[i] == max,
{
    let mut max = a[0];
    for i in 1..a.len()
        invariant
            forall|j: int| 0 <= j < i ==> a[j] <= max,
            exists|j: int| 0 <= j < i && a[j] == max,
    {
        if a[i] > max {
            max = a[i];
        }
    }
    max
}

} // verus!
)";

Outcome verus_golden() {
  const auto binary = resolve_verus_binary("");
  VerusOptions opt;
  opt.binary = binary;
  VerusBackend verus(opt);
  if (verus.version() == "unavailable") {
    return skip("Verus not installed (set PSV_VERUS_BIN)");
  }
  const auto spec = ProblemSpec::from_text(specpipe::extract_spec(kMaxElementFull), Origin::seed());
  const auto stub = verus.verify_spec_only(spec);
  if (!stub.verified()) return fail("stub: " + stub.diagnostics);
  const auto full = verus.verify_program(kMaxElementFull);
  if (!full.verified()) return fail("full program: " + full.diagnostics);
  std::string mutant = kMaxElementFull;
  const auto from = mutant.find("        invariant");
  const auto to = mutant.find("    {\n        if");
  mutant.erase(from, to - from);
  const auto m = verus.verify_program(mutant);
  if (m.status != VerdictStatus::Rejected) {
    return fail("invariant-free mutant came back " + std::string(to_string(m.status)));
  }
  return {};
}

Outcome end_to_end(const fs::path& root) {
  const auto dir = root / "e2e";
  const auto r = run_toy(dir);
  if (r.exit_code != 0) return fail("run exit " + std::to_string(r.exit_code) + ": " + r.message);
  const auto run_dir = dir / "run";
  ToyOracleBackend oracle;

  // (a) strictly growing pool, by at most B per iteration
  std::vector<std::set<std::string>> ids;
  for (int t = 0; t <= 3; ++t) {
    std::set<std::string> s;
    for (const auto& j : read_jsonl(iteration_dir(run_dir, t) / "problems.jsonl")) {
      s.insert(j.at("id").get<std::string>());
    }
    ids.push_back(std::move(s));
  }
  for (int t = 0; t < 3; ++t) {
    const auto& a = ids[t];
    const auto& b = ids[t + 1];
    if (!std::includes(b.begin(), b.end(), a.begin(), a.end()) || b.size() <= a.size()) {
      return fail("(a) pool did not strictly grow at t=" + std::to_string(t));
    }
    if (b.size() - a.size() > 8) return fail("(a) growth above B at t=" + std::to_string(t));
  }

  // (b) every exported record re-verifies; ids unique per export
  for (int t = 0; t < 3; ++t) {
    std::set<std::string> seen;
    for (const auto& rec : read_jsonl(iteration_dir(run_dir, t) / "rft.jsonl")) {
      const auto id = rec.at("problem_id").get<std::string>();
      if (!seen.insert(id).second) return fail("(b) duplicate id " + id);
      const auto spec = ProblemSpec::from_text(rec.at("spec").get<std::string>(), Origin::seed());
      const auto code = specpipe::first_code_block(
          rec.at("completion").at(0).at("content").get<std::string>());
      const auto v = oracle.verify_solution(spec, code);
      if (!v.verified()) return fail("(b) record " + id + " does not re-verify: " + v.diagnostics);
    }
    if (seen.empty()) return fail("(b) empty export at t=" + std::to_string(t));
  }

  // (c) pass@1 on the seed specs never decreases
  double prev_solve = -1.0, prev_eval = -1.0;
  std::string trace;
  for (int t = 0; t < 3; ++t) {
    const auto m = read_json(iteration_dir(run_dir, t) / "metrics.json");
    const double solve = m.at("solve").at("seed_pass_rate").get<double>();
    const double ev = m.at("eval").at("pass_at_k").at("seed").at("1").get<double>();
    trace += " t" + std::to_string(t) + "=" + std::to_string(solve) + "/" + std::to_string(ev);
    if (solve < prev_solve || ev < prev_eval) return fail("(c) pass@1 decreased:" + trace);
    prev_solve = solve;
    prev_eval = ev;
  }
  return {Outcome::Pass, "seed pass@1 (solve/eval):" + trace};
}

Outcome determinism(const fs::path& root) {
  const auto a = root / "det_a";
  const auto b = root / "det_b";
  // Same config file for both runs: paths inside the snapshot must agree.
  const auto cfg_path = fixture::write_toy_run(a);
  const auto cfg = RunConfig::load(cfg_path);
  const auto b1 = make_backends(cfg);
  const auto b2 = make_backends(cfg);
  if (const auto r = run(cfg, a / "run", b1); r.exit_code != 0) return fail(r.message);
  if (const auto r = run(cfg, b / "run", b2); r.exit_code != 0) return fail(r.message);
  const auto ta = fixture::read_tree(a / "run");
  const auto tb = fixture::read_tree(b / "run");
  if (ta.size() != tb.size()) return fail("file sets differ");
  for (const auto& [path, content] : ta) {
    const auto it = tb.find(path);
    if (it == tb.end()) return fail("missing " + path);
    if (it->second != content) return fail("differs: " + path);
  }
  return {Outcome::Pass, std::to_string(ta.size()) + " files identical"};
}

std::vector<std::string> prompt_texts(const fs::path& run_dir, int iterations) {
  std::vector<std::string> out;
  for (int t = 0; t < iterations; ++t) {
    const auto summary = read_json(iteration_dir(run_dir, t) / "proposals.json");
    for (const auto& p : summary.at("prompts")) {
      std::string text;
      for (const auto& m : p.at("messages")) text += m.at("content").get<std::string>();
      out.push_back(text);
    }
  }
  return out;
}

// The examples block: from the first "Problem 1" header to the end of the
// last example's spec (its trailing open brace).
std::string example_section(const std::string& prompt) {
  const auto begin = prompt.find("Problem 1");
  if (begin == std::string::npos) return {};
  const std::regex last_header(R"(\nProblem \d+(: [A-Z]+)?\n)");
  std::size_t last = begin;
  for (auto it = std::sregex_iterator(prompt.begin() + begin, prompt.end(), last_header);
       it != std::sregex_iterator(); ++it) {
    last = begin + static_cast<std::size_t>(it->position());
  }
  const auto end = prompt.find("\n{", last);
  return end == std::string::npos ? std::string{} : prompt.substr(begin, end + 2 - begin);
}

Outcome ablations(const fs::path& root) {
  // labels off
  {
    const auto dir = root / "no_labels";
    if (const auto r = run_toy(dir, {{"ablation.difficulty_labels_on", false}}); r.exit_code != 0) {
      return fail("labels-off run: " + r.message);
    }
    const std::regex labelled(R"(Problem \d+: (EASY|MEDIUM|HARD|IMPOSSIBLE))");
    const std::regex bare(R"((^|\n)Problem \d+\n)");
    for (const auto& p : prompt_texts(dir / "run", 3)) {
      if (std::regex_search(p, labelled)) return fail("labels-off prompt carries a label");
      if (!std::regex_search(p, bare)) return fail("labels-off prompt has no examples");
    }
  }
  // resampling off
  {
    const auto dir = root / "frozen";
    if (const auto r = run_toy(dir, {{"ablation.context_resampling_on", false}}); r.exit_code != 0) {
      return fail("frozen run: " + r.message);
    }
    const auto prompts = prompt_texts(dir / "run", 3);
    if (prompts.size() != 12) return fail("expected 12 prompts, got " + std::to_string(prompts.size()));
    const auto first = example_section(prompts.front());
    if (first.empty()) return fail("no example section found");
    for (const auto& p : prompts) {
      if (example_section(p) != first) return fail("example section changed under frozen context");
    }
    // Cross-check against the persisted frozen draw.
    std::vector<ContextExample> ctx;
    const auto saved = read_json(dir / "run" / "proposer_state.json");
    for (const auto& e : saved.at("frozen_context")) {
      ctx.push_back(context_example_from_json(e));
    }
    const auto rendered = render_examples(ctx, true);
    for (const auto& p : prompts) {
      if (p.find(rendered) == std::string::npos) return fail("prompt lacks the frozen examples");
    }
  }
  // verification off
  {
    const auto dir = root / "no_verify";
    if (const auto r = run_toy(dir, {{"ablation.verification_on", false}}); r.exit_code != 0) {
      return fail("verification-off run: " + r.message);
    }
    ToyOracleBackend oracle;
    bool saw_unverified = false;
    for (int t = 0; t < 3; ++t) {
      const auto it = iteration_dir(dir / "run", t);
      std::map<std::string, PassRate> counts;
      std::map<std::string, ProblemSpec> specs;
      for (const auto& j : read_jsonl(it / "problems.jsonl")) {
        auto p = problem_from_json(j);
        specs.emplace(p.id, p);
      }
      for (const auto& j : read_jsonl(it / "attempts.jsonl")) {
        const auto a = attempt_from_json(j);
        // The stored verdict must be the true one.
        const auto v = oracle.verify_solution(specs.at(a.problem_id), a.code);
        if (v.status != a.verdict.status) return fail("attempt verdict differs from oracle");
        auto& c = counts[a.problem_id];
        ++c.samples;
        if (v.verified()) ++c.verified;
      }
      std::set<std::string> rft_ids;
      std::size_t records = 0;
      for (const auto& rec : read_jsonl(it / "rft.jsonl")) {
        ++records;
        const auto id = rec.at("problem_id").get<std::string>();
        rft_ids.insert(id);
        if (counts.at(id).verified == 0) saw_unverified = true;
        if (rec.at("sample_index").get<int>() != 1) return fail("record is not the first attempt");
      }
      if (records != counts.size() || rft_ids.size() != counts.size()) {
        return fail("expected one record per attempted problem at t=" + std::to_string(t));
      }
      const auto rates = read_json(it / "pass_rates.json").at("rates");
      for (const auto& [id, c] : counts) {
        if (rates.at(id).at("verified").get<int>() != c.verified) {
          return fail("pass_rates.json disagrees with true verdicts for " + id);
        }
      }
    }
    if (!saw_unverified) return fail("verification-off export never included an unverified problem");
  }
  return {};
}

Outcome budget() {
  for (int b = 0; b <= 1000; ++b) {
    const auto alloc = allocate_budget(b);
    int sum = 0;
    for (const auto& [d, n] : alloc) sum += n;
    if (sum != b) return fail("sum mismatch at B=" + std::to_string(b));
    if (b % 4 == 0) {
      for (const auto& [d, n] : alloc) {
        if (n != b / 4) return fail("uneven split at B=" + std::to_string(b));
      }
    }
  }
  return {};
}

}  // namespace

// Optional argument: run only criteria whose name contains it. Exit code 77
// means everything selected was skipped.
int main(int argc, char** argv) {
  const std::string filter = argc > 1 ? argv[1] : "";
  const auto root = scratch_root();
  struct Criterion {
    const char* name;
    double limit_seconds;
    std::function<Outcome()> check;
  };
  const std::vector<Criterion> criteria = {
      {"pass@k exactness", 1.0, pass_at_k_exactness},
      {"difficulty conformance", 1.0, difficulty_conformance},
      {"max_element golden (Verus)", 120.0, verus_golden},
      {"end-to-end synthetic self-play", 30.0, [&] { return end_to_end(root); }},
      {"determinism", 60.0, [&] { return determinism(root); }},
      {"ablation fidelity", 30.0, [&] { return ablations(root); }},
      {"budget allocation", 1.0, budget},
  };
  int failures = 0, ran = 0, skipped = 0;
  for (const auto& c : criteria) {
    if (std::string(c.name).find(filter) == std::string::npos) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = fail(std::string("exception: ") + e.what());
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.kind == Outcome::Pass && secs > c.limit_seconds) {
      o = fail("took " + std::to_string(secs) + "s, limit " + std::to_string(c.limit_seconds) + "s");
    }
    const char* tag = o.kind == Outcome::Pass ? "PASS" : o.kind == Outcome::Fail ? "FAIL" : "SKIP";
    if (o.kind == Outcome::Fail) ++failures;
    if (o.kind == Outcome::Skip) ++skipped;
    std::cout << tag << "  " << c.name << "  (" << secs << "s)";
    if (!o.detail.empty()) std::cout << "  " << o.detail;
    std::cout << std::endl;
  }
  if (std::getenv("PSV_KEEP_SCRATCH") == nullptr) {
    fs::remove_all(root);
  } else {
    std::cout << "scratch kept in " << root.string() << std::endl;
  }
  if (failures > 0) return 1;
  return ran > 0 && skipped == ran ? 77 : 0;
}
