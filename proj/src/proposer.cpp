#include "psv/proposer.hpp"

#include <random>
#include <set>

#include "psv/parallel.hpp"
#include "psv/prompts.hpp"
#include "psv/specpipe.hpp"

namespace psv {

namespace {

constexpr std::string_view kProposalStatusNames[] = {
    "accepted", "no_code_block", "extract_error", "duplicate_of_pool", "duplicate_in_batch",
    "invalid"};

// Classes ordered nearest-first from `from`; on equal distance the easier
// class comes first.
std::vector<Difficulty> neighbours(Difficulty from) {
  const int c = static_cast<int>(from);
  std::vector<Difficulty> out;
  for (int d = 1; d < 4; ++d) {
    if (c - d >= 0) out.push_back(static_cast<Difficulty>(c - d));
    if (c + d < 4) out.push_back(static_cast<Difficulty>(c + d));
  }
  return out;
}

}  // namespace

Buckets bucketize(const DataPool& pool, int iteration, int k_trn, double tau_easy,
                  double tau_medium) {
  Buckets buckets;
  for (auto d : kAllDifficulties) buckets[d];
  for (const auto& p : pool.problems()) {
    if (!p.validity.is_valid()) continue;
    const double r = pool.pass_rate(p.id, iteration, k_trn);
    buckets[difficulty(r, tau_easy, tau_medium)].push_back(p.id);
  }
  return buckets;
}

json to_json(const ContextExample& e) {
  return {{"problem_id", e.problem_id}, {"spec", e.spec_text}, {"label", to_string(e.label)}};
}

ContextExample context_example_from_json(const json& j) {
  return {j.at("problem_id").get<std::string>(), j.at("spec").get<std::string>(),
          difficulty_from_string(j.at("label").get<std::string>())};
}

std::vector<ContextExample> sample_context(const DataPool& pool, const Buckets& buckets,
                                           int k_prop, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  // Uniform shuffle of each bucket; a prefix is a uniform draw without
  // replacement.
  std::map<Difficulty, std::vector<std::string>> remaining;
  std::size_t total = 0;
  for (auto d : kAllDifficulties) {
    auto ids = buckets.count(d) ? buckets.at(d) : std::vector<std::string>{};
    for (std::size_t i = ids.size(); i > 1; --i) {
      std::swap(ids[i - 1], ids[bounded(rng, i)]);
    }
    total += ids.size();
    remaining[d] = std::move(ids);
  }

  std::map<Difficulty, std::vector<std::string>> picked;
  const std::size_t want_total = std::min<std::size_t>(total, static_cast<std::size_t>(std::max(k_prop, 0)));
  const auto quota = allocate_budget(static_cast<int>(want_total));
  auto take = [&](Difficulty from, std::size_t n) {
    auto& src = remaining[from];
    const auto m = std::min(n, src.size());
    auto& dst = picked[from];
    dst.insert(dst.end(), src.begin(), src.begin() + static_cast<std::ptrdiff_t>(m));
    src.erase(src.begin(), src.begin() + static_cast<std::ptrdiff_t>(m));
    return m;
  };
  std::map<Difficulty, std::size_t> deficit;
  for (auto d : kAllDifficulties) {
    const auto q = static_cast<std::size_t>(quota.at(d));
    deficit[d] = q - take(d, q);
  }
  for (auto d : kAllDifficulties) {
    for (auto n : neighbours(d)) {
      if (deficit[d] == 0) break;
      deficit[d] -= take(n, deficit[d]);
    }
  }

  std::vector<ContextExample> out;
  for (std::size_t round = 0; out.size() < want_total; ++round) {
    for (auto d : kAllDifficulties) {
      const auto& ids = picked[d];
      if (round < ids.size()) {
        const auto* spec = pool.find(ids[round]);
        if (spec == nullptr) throw Error("bucket references unknown problem " + ids[round]);
        out.push_back({spec->id, spec->text, d});
      }
    }
  }
  return out;
}

std::string render_examples(const std::vector<ContextExample>& context,
                            bool difficulty_labels_on) {
  std::string out;
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += "Problem " + std::to_string(i + 1);
    if (difficulty_labels_on) {
      out += ": ";
      out += to_string(context[i].label);
    }
    out += "\n\n";
    out += context[i].spec_text;
  }
  return out;
}

std::vector<ChatMessage> build_prompt(const std::vector<ContextExample>& context, Difficulty target,
                                      bool difficulty_labels_on) {
  const auto& t = prompts::proposer();
  std::vector<ChatMessage> messages;
  if (!t.system.empty()) messages.push_back({"system", t.system});
  messages.push_back(
      {"user", prompts::substitute(t.user, {{"difficulty", std::string(to_string(target))},
                                            {"examples", render_examples(context, difficulty_labels_on)}})});
  return messages;
}

std::map<Difficulty, int> allocate_budget(int budget, const std::vector<Difficulty>& targets) {
  if (budget < 0) throw Error("budget must be non-negative");
  std::map<Difficulty, int> out;
  for (auto d : kAllDifficulties) out[d] = 0;
  if (targets.empty()) {
    if (budget > 0) throw Error("no proposal targets configured");
    return out;
  }
  const int m = static_cast<int>(targets.size());
  for (auto d : targets) out[d] = budget / m;
  for (int i = 0; i < budget % m; ++i) ++out[targets[static_cast<std::size_t>(i)]];
  return out;
}

std::string_view to_string(ProposalStatus s) { return kProposalStatusNames[static_cast<int>(s)]; }

json to_json(const ProposalRecord& r) {
  return {{"schema_version", kSchemaVersion},
          {"iteration", r.iteration},
          {"target", to_string(r.target)},
          {"completion_index", r.completion_index},
          {"status", to_string(r.status)},
          {"problem_id", r.problem_id},
          {"spec", r.spec_text},
          {"reason", r.reason}};
}

json to_json(const BatchMetrics& m) {
  return {{"requested", m.requested},
          {"extracted", m.extracted},
          {"unique", m.unique},
          {"valid", m.valid},
          {"uniqueness_rate", m.uniqueness_rate()},
          {"validity_rate", m.validity_rate()}};
}

ProposalBatch propose_batch(ProposerState& state, const DataPool& pool, const Buckets& buckets,
                            const GenerationBackend& backend, const ModelRef& model,
                            const VerificationBackend& verifier, int iteration, int budget,
                            int max_in_flight) {
  const auto& cfg = state.config;
  ProposalBatch batch;
  const auto allocation = allocate_budget(budget, cfg.targets);

  if (!cfg.context_resampling_on && !state.frozen_context) {
    state.frozen_context =
        sample_context(pool, buckets, cfg.k_prop, derive_seed(cfg.seed, "frozen-context"));
  }

  std::vector<Difficulty> classes;
  for (auto d : kAllDifficulties) {
    if (allocation.at(d) > 0) classes.push_back(d);
  }
  for (auto d : classes) {
    const std::uint64_t ctx_seed = derive_seed(
        derive_seed(derive_seed(cfg.seed, "context"), static_cast<std::uint64_t>(iteration)),
        static_cast<std::uint64_t>(d));
    const auto context = cfg.context_resampling_on
                             ? sample_context(pool, buckets, cfg.k_prop, ctx_seed)
                             : *state.frozen_context;
    batch.prompts.emplace_back(d, build_prompt(context, d, cfg.difficulty_labels_on));
  }

  std::vector<std::vector<std::string>> completions(classes.size());
  parallel_for(classes.size(), max_in_flight, [&](std::size_t i) {
    const auto d = classes[i];
    const std::uint64_t gen_seed = derive_seed(
        derive_seed(derive_seed(cfg.seed, "propose"), static_cast<std::uint64_t>(iteration)),
        static_cast<std::uint64_t>(d));
    const std::string tag = "propose/t=" + std::to_string(iteration) + "/" + std::string(to_string(d));
    completions[i] = sample_proposals(backend, model, batch.prompts[i].second, allocation.at(d),
                                      cfg.sampling, gen_seed, tag);
  });

  std::set<std::string> batch_canonicals;
  std::vector<std::size_t> to_check;
  std::vector<ProblemSpec> candidates;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    for (std::size_t j = 0; j < completions[i].size(); ++j) {
      ProposalRecord rec;
      rec.iteration = iteration;
      rec.target = classes[i];
      rec.completion_index = static_cast<int>(j);
      ++batch.metrics.requested;
      const auto blocks = specpipe::extract_code_blocks(completions[i][j]);
      if (blocks.empty()) {
        rec.status = ProposalStatus::NoCodeBlock;
        batch.records.push_back(std::move(rec));
        continue;
      }
      std::string text;
      try {
        text = specpipe::extract_spec(blocks.front());
      } catch (const specpipe::SpecError& e) {
        rec.status = ProposalStatus::ExtractError;
        rec.reason = e.what();
        batch.records.push_back(std::move(rec));
        continue;
      }
      ++batch.metrics.extracted;
      auto spec = ProblemSpec::from_text(std::move(text), Origin::proposed(iteration, classes[i]));
      rec.problem_id = spec.id;
      rec.spec_text = spec.text;
      if (pool.contains_canonical(spec.canonical)) {
        rec.status = ProposalStatus::DuplicateOfPool;
      } else if (!batch_canonicals.insert(spec.canonical).second) {
        rec.status = ProposalStatus::DuplicateInBatch;
      } else {
        ++batch.metrics.unique;
        rec.status = ProposalStatus::Accepted;  // provisional until verified
        to_check.push_back(batch.records.size());
        candidates.push_back(std::move(spec));
      }
      batch.records.push_back(std::move(rec));
    }
  }

  std::vector<VerifierVerdict> verdicts(candidates.size());
  parallel_for(candidates.size(), max_in_flight, [&](std::size_t i) {
    try {
      verdicts[i] = check_spec_validity(verifier, candidates[i]);
    } catch (const std::exception& e) {
      verdicts[i] = VerifierVerdict::tool_error(e.what());
      candidates[i].validity = Validity::invalid(std::string("ToolError: ") + e.what());
    }
  });
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    auto& rec = batch.records[to_check[i]];
    if (candidates[i].validity.is_valid()) {
      ++batch.metrics.valid;
      batch.accepted.push_back(std::move(candidates[i]));
    } else {
      rec.status = ProposalStatus::Invalid;
      rec.reason = candidates[i].validity.reason;
    }
  }
  return batch;
}

}  // namespace psv
