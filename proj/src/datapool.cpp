#include "psv/datapool.hpp"

#include <algorithm>

#include "psv/specpipe.hpp"

namespace psv {

namespace {

constexpr std::string_view kStatusNames[] = {"Verified", "Rejected", "Timeout", "ToolError"};
constexpr std::string_view kDifficultyNames[] = {"EASY", "MEDIUM", "HARD", "IMPOSSIBLE"};

json origin_to_json(const Origin& o) {
  if (o.kind == Origin::Kind::Seed) return {{"kind", "seed"}};
  json j = {{"kind", "proposed"}, {"iteration", o.iteration}};
  j["target"] = o.target ? json(std::string(to_string(*o.target))) : json(nullptr);
  return j;
}

Origin origin_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "seed") return Origin::seed();
  if (kind != "proposed") throw SchemaError("unknown origin kind " + kind);
  std::optional<Difficulty> target;
  if (!j.at("target").is_null()) target = difficulty_from_string(j["target"].get<std::string>());
  return Origin::proposed(j.at("iteration").get<int>(), target);
}

json validity_to_json(const Validity& v) {
  switch (v.kind) {
    case Validity::Kind::Unchecked:
      return {{"status", "unchecked"}};
    case Validity::Kind::Valid:
      return {{"status", "valid"}};
    case Validity::Kind::Invalid:
      return {{"status", "invalid"}, {"reason", v.reason}};
  }
  return {};
}

Validity validity_from_json(const json& j) {
  const auto s = j.at("status").get<std::string>();
  if (s == "unchecked") return {};
  if (s == "valid") return Validity::valid();
  if (s == "invalid") return Validity::invalid(j.at("reason").get<std::string>());
  throw SchemaError("unknown validity " + s);
}

}  // namespace

std::string_view to_string(VerdictStatus s) { return kStatusNames[static_cast<int>(s)]; }

VerdictStatus verdict_status_from_string(std::string_view s) {
  for (int i = 0; i < 4; ++i) {
    if (kStatusNames[i] == s) return static_cast<VerdictStatus>(i);
  }
  throw SchemaError("unknown verdict status " + std::string(s));
}

VerifierVerdict VerifierVerdict::rejected(std::string why, double seconds) {
  if (why.empty()) why = "rejected without diagnostics";
  return {VerdictStatus::Rejected, std::move(why), seconds};
}

json to_json(const VerifierVerdict& v) {
  return {{"status", to_string(v.status)}, {"diagnostics", v.diagnostics},
          {"wall_time", v.wall_time}};
}

VerifierVerdict verdict_from_json(const json& j) {
  return {verdict_status_from_string(j.at("status").get<std::string>()),
          j.at("diagnostics").get<std::string>(), j.at("wall_time").get<double>()};
}

std::string_view to_string(Difficulty d) { return kDifficultyNames[static_cast<int>(d)]; }

Difficulty difficulty_from_string(std::string_view s) {
  for (int i = 0; i < 4; ++i) {
    if (kDifficultyNames[i] == s) return static_cast<Difficulty>(i);
  }
  throw SchemaError("unknown difficulty " + std::string(s));
}

Difficulty difficulty(double rate, double tau_easy, double tau_medium) {
  if (rate >= tau_easy) return Difficulty::Easy;
  if (rate >= tau_medium) return Difficulty::Medium;
  if (rate > 0.0) return Difficulty::Hard;
  return Difficulty::Impossible;
}

std::string problem_id_for(std::string_view canonical) {
  return "p" + sha256_hex(canonical).substr(0, 16);
}

ProblemSpec ProblemSpec::from_text(std::string text, Origin origin) {
  ProblemSpec p;
  p.canonical = specpipe::normalize(text);
  p.id = problem_id_for(p.canonical);
  p.text = std::move(text);
  p.origin = origin;
  return p;
}

json to_json(const ProblemSpec& p) {
  return {{"schema_version", kSchemaVersion},
          {"id", p.id},
          {"text", p.text},
          {"canonical", p.canonical},
          {"origin", origin_to_json(p.origin)},
          {"validity", validity_to_json(p.validity)}};
}

ProblemSpec problem_from_json(const json& j) {
  ProblemSpec p;
  p.id = j.at("id").get<std::string>();
  p.text = j.at("text").get<std::string>();
  p.canonical = j.at("canonical").get<std::string>();
  p.origin = origin_from_json(j.at("origin"));
  p.validity = validity_from_json(j.at("validity"));
  return p;
}

json to_json(const Attempt& a) {
  return {{"schema_version", kSchemaVersion},
          {"problem_id", a.problem_id},
          {"iteration", a.iteration},
          {"sample_index", a.sample_index},
          {"code", a.code},
          {"verdict", to_json(a.verdict)},
          {"latency", a.latency}};
}

Attempt attempt_from_json(const json& j) {
  Attempt a;
  a.problem_id = j.at("problem_id").get<std::string>();
  a.iteration = j.at("iteration").get<int>();
  a.sample_index = j.at("sample_index").get<int>();
  a.code = j.at("code").get<std::string>();
  a.verdict = verdict_from_json(j.at("verdict"));
  a.latency = j.at("latency").get<double>();
  return a;
}

std::size_t DataPool::add_problems(const std::vector<ProblemSpec>& specs) {
  std::size_t added = 0;
  for (const auto& spec : specs) {
    if (auto it = by_id_.find(spec.id); it != by_id_.end()) {
      if (problems_[it->second].canonical != spec.canonical) {
        throw Error("problem id collision on " + spec.id);
      }
      continue;
    }
    if (!spec.validity.is_valid()) continue;
    if (canonicals_.contains(spec.canonical)) continue;
    by_id_.emplace(spec.id, problems_.size());
    canonicals_.insert(spec.canonical);
    problems_.push_back(spec);
    ++added;
  }
  return added;
}

void DataPool::record_attempt(Attempt attempt) {
  if (!by_id_.contains(attempt.problem_id)) {
    throw Error("attempt for unknown problem " + attempt.problem_id);
  }
  auto key = std::make_tuple(attempt.problem_id, attempt.iteration, attempt.sample_index);
  if (attempts_.contains(key)) {
    throw Error("duplicate attempt " + attempt.problem_id + " t=" +
                std::to_string(attempt.iteration) + " j=" + std::to_string(attempt.sample_index));
  }
  attempts_.emplace(std::move(key), std::move(attempt));
}

void DataPool::record_attempts(std::vector<Attempt> attempts) {
  for (auto& a : attempts) record_attempt(std::move(a));
}

PassRate DataPool::pass_counts(std::string_view problem_id, int iteration, int k_trn) const {
  PassRate pr;
  for (int j = 1; j <= k_trn; ++j) {
    auto it = attempts_.find(std::make_tuple(std::string(problem_id), iteration, j));
    if (it == attempts_.end()) {
      throw Error("incomplete solve pass for " + std::string(problem_id) + " at iteration " +
                  std::to_string(iteration));
    }
    ++pr.samples;
    if (it->second.verdict.verified()) ++pr.verified;
  }
  return pr;
}

double DataPool::pass_rate(std::string_view problem_id, int iteration, int k_trn) const {
  return pass_counts(problem_id, iteration, k_trn).rate();
}

std::map<std::string, PassRate> DataPool::pass_table(int iteration, int k_trn) const {
  std::map<std::string, PassRate> out;
  for (const auto& p : problems_) out.emplace(p.id, pass_counts(p.id, iteration, k_trn));
  return out;
}

const ProblemSpec* DataPool::find(std::string_view id) const {
  auto it = by_id_.find(std::string(id));
  return it == by_id_.end() ? nullptr : &problems_[it->second];
}

bool DataPool::contains_canonical(std::string_view canonical) const {
  return canonicals_.find(canonical) != canonicals_.end();
}

std::vector<Attempt> DataPool::attempts_for(std::string_view problem_id, int iteration) const {
  std::vector<Attempt> out;
  const std::string id(problem_id);
  for (auto it = attempts_.lower_bound(std::make_tuple(id, iteration, 0));
       it != attempts_.end() && std::get<0>(it->first) == id && std::get<1>(it->first) == iteration;
       ++it) {
    out.push_back(it->second);
  }
  return out;
}

std::vector<Attempt> DataPool::attempts_at(int iteration) const {
  std::vector<Attempt> out;
  for (const auto& p : problems_) {
    auto part = attempts_for(p.id, iteration);
    out.insert(out.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return out;
}

std::vector<int> DataPool::attempt_iterations() const {
  std::set<int> seen;
  for (const auto& kv : attempts_) seen.insert(std::get<1>(kv.first));
  return {seen.begin(), seen.end()};
}

void DataPool::drop_attempts_before(int t) {
  std::erase_if(attempts_, [t](const auto& kv) { return std::get<1>(kv.first) < t; });
}

bool DataPool::operator==(const DataPool& other) const {
  return problems_ == other.problems_ && attempts_ == other.attempts_;
}

json to_json(const IterationSnapshot& s) {
  json rates = json::object();
  for (const auto& [id, pr] : s.pass_rates) {
    rates[id] = {{"verified", pr.verified}, {"samples", pr.samples}};
  }
  return {{"schema_version", kSchemaVersion}, {"iteration", s.iteration},
          {"problem_ids", s.problem_ids},     {"attempt_counts", s.attempt_counts},
          {"pass_rates", rates},              {"solver_model", s.solver_model},
          {"rng", s.rng}};
}

IterationSnapshot snapshot_from_json(const json& j) {
  IterationSnapshot s;
  s.iteration = j.at("iteration").get<int>();
  s.problem_ids = j.at("problem_ids").get<std::vector<std::string>>();
  s.attempt_counts = j.at("attempt_counts").get<std::map<std::string, int>>();
  for (const auto& [id, pr] : j.at("pass_rates").items()) {
    s.pass_rates[id] = {pr.at("verified").get<int>(), pr.at("samples").get<int>()};
  }
  s.solver_model = j.at("solver_model");
  s.rng = j.at("rng");
  return s;
}

IterationSnapshot snapshot(const DataPool& pool, int iteration, int k_trn, const fs::path& dir,
                           const json& solver_model, const json& rng) {
  fs::create_directories(dir);
  std::vector<json> problems;
  IterationSnapshot snap;
  snap.iteration = iteration;
  snap.solver_model = solver_model;
  snap.rng = rng;
  for (const auto& p : pool.problems()) {
    problems.push_back(to_json(p));
    snap.problem_ids.push_back(p.id);
  }
  std::vector<json> attempts;
  for (int t : pool.attempt_iterations()) {
    for (const auto& a : pool.attempts_at(t)) {
      attempts.push_back(to_json(a));
      if (t == iteration) ++snap.attempt_counts[a.problem_id];
    }
  }
  bool complete = !pool.problems().empty();
  for (const auto& p : pool.problems()) {
    if (snap.attempt_counts[p.id] < k_trn) {
      complete = false;
      break;
    }
  }
  if (complete) snap.pass_rates = pool.pass_table(iteration, k_trn);
  std::erase_if(snap.attempt_counts, [](const auto& kv) { return kv.second == 0; });

  write_jsonl(dir / pool_files::kProblems, problems);
  write_jsonl(dir / pool_files::kAttempts, attempts);
  write_file_atomic(dir / pool_files::kSnapshot, to_json(snap).dump(2) + "\n");
  return snap;
}

IterationSnapshot load_snapshot(const fs::path& dir) {
  const auto path = dir / pool_files::kSnapshot;
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
  check_schema(j, path);
  try {
    return snapshot_from_json(j);
  } catch (const json::exception& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

DataPool load_pool(const fs::path& dir) {
  DataPool pool;
  const auto ppath = dir / pool_files::kProblems;
  std::vector<ProblemSpec> problems;
  for (const auto& j : read_jsonl(ppath)) {
    check_schema(j, ppath);
    try {
      problems.push_back(problem_from_json(j));
    } catch (const json::exception& e) {
      throw SchemaError(ppath.string() + ": " + e.what());
    }
  }
  if (pool.add_problems(problems) != problems.size()) {
    throw SchemaError(ppath.string() + ": duplicate or invalid problems");
  }
  const auto apath = dir / pool_files::kAttempts;
  if (fs::exists(apath)) {
    for (const auto& j : read_jsonl(apath)) {
      check_schema(j, apath);
      try {
        pool.record_attempt(attempt_from_json(j));
      } catch (const json::exception& e) {
        throw SchemaError(apath.string() + ": " + e.what());
      }
    }
  }
  return pool;
}

void write_pass_rates(const fs::path& path, const std::map<std::string, PassRate>& table,
                      int k_trn, double tau_easy, double tau_medium) {
  json rates = json::object();
  for (const auto& [id, pr] : table) {
    rates[id] = {{"verified", pr.verified},
                 {"rate", pr.rate()},
                 {"difficulty", to_string(difficulty(pr.rate(), tau_easy, tau_medium))}};
  }
  json doc = {{"schema_version", kSchemaVersion},
              {"k_trn", k_trn},
              {"tau_easy", tau_easy},
              {"tau_medium", tau_medium},
              {"rates", rates}};
  write_file_atomic(path, doc.dump(2) + "\n");
}

}  // namespace psv
