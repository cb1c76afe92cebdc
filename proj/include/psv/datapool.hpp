#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "psv/common.hpp"
#include "psv/verdict.hpp"

namespace psv {

enum class Difficulty { Easy, Medium, Hard, Impossible };

inline constexpr Difficulty kAllDifficulties[] = {Difficulty::Easy, Difficulty::Medium,
                                                  Difficulty::Hard, Difficulty::Impossible};

/// Upper-case label as rendered in prompts ("EASY", ...).
std::string_view to_string(Difficulty d);
Difficulty difficulty_from_string(std::string_view s);

/// Easy iff rate >= tau_easy; Medium iff tau_medium <= rate < tau_easy;
/// Hard iff 0 < rate < tau_medium; Impossible iff rate == 0.
Difficulty difficulty(double rate, double tau_easy, double tau_medium);

struct Origin {
  enum class Kind { Seed, Proposed } kind = Kind::Seed;
  int iteration = 0;
  std::optional<Difficulty> target;

  static Origin seed() { return {}; }
  static Origin proposed(int t, std::optional<Difficulty> target) {
    return {Kind::Proposed, t, target};
  }
  bool operator==(const Origin&) const = default;
};

struct Validity {
  enum class Kind { Unchecked, Valid, Invalid } kind = Kind::Unchecked;
  std::string reason;

  static Validity valid() { return {Kind::Valid, {}}; }
  static Validity invalid(std::string why) { return {Kind::Invalid, std::move(why)}; }
  bool is_valid() const { return kind == Kind::Valid; }
  bool operator==(const Validity&) const = default;
};

struct ProblemSpec {
  std::string id;
  std::string text;
  std::string canonical;
  Origin origin;
  Validity validity;

  /// Builds a spec with canonical form and content-derived id.
  static ProblemSpec from_text(std::string text, Origin origin);

  bool operator==(const ProblemSpec&) const = default;
};

/// Content-hash id derived from the canonical text.
std::string problem_id_for(std::string_view canonical);

struct Attempt {
  std::string problem_id;
  int iteration = 0;
  int sample_index = 1;  // 1-based
  std::string code;
  VerifierVerdict verdict;
  double latency = 0.0;

  bool operator==(const Attempt&) const = default;
};

json to_json(const ProblemSpec& p);
ProblemSpec problem_from_json(const json& j);
json to_json(const Attempt& a);
Attempt attempt_from_json(const json& j);

struct PassRate {
  int verified = 0;
  int samples = 0;
  double rate() const { return samples == 0 ? 0.0 : static_cast<double>(verified) / samples; }
  bool operator==(const PassRate&) const = default;
};

/// The evolving data pool: problems in insertion order plus attempts keyed
/// by (problem, iteration, sample). All mutation goes through one owner;
/// const access is safe to share.
class DataPool {
 public:
  /// Adds valid specs whose canonical form is new. Returns the count added.
  /// Throws Error when an id is reused for different canonical text.
  std::size_t add_problems(const std::vector<ProblemSpec>& specs);

  void record_attempt(Attempt attempt);
  void record_attempts(std::vector<Attempt> attempts);

  /// Mean verification outcome over exactly `k_trn` attempts of iteration
  /// `t`. Only Verified counts as success. Throws on an incomplete pass.
  double pass_rate(std::string_view problem_id, int iteration, int k_trn) const;
  PassRate pass_counts(std::string_view problem_id, int iteration, int k_trn) const;

  /// Pass counts for every problem at iteration t.
  std::map<std::string, PassRate> pass_table(int iteration, int k_trn) const;

  const std::vector<ProblemSpec>& problems() const { return problems_; }
  const ProblemSpec* find(std::string_view id) const;
  bool contains_canonical(std::string_view canonical) const;
  std::size_t size() const { return problems_.size(); }

  /// Attempts for one problem at one iteration, ordered by sample index.
  std::vector<Attempt> attempts_for(std::string_view problem_id, int iteration) const;
  /// All attempts of an iteration ordered by (problem insertion order, sample).
  std::vector<Attempt> attempts_at(int iteration) const;
  std::size_t attempt_count() const { return attempts_.size(); }
  /// Iterations that currently have attempts, ascending.
  std::vector<int> attempt_iterations() const;

  /// Drops attempts recorded before iteration `t`.
  void drop_attempts_before(int t);

  bool operator==(const DataPool& other) const;

 private:
  std::vector<ProblemSpec> problems_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::set<std::string, std::less<>> canonicals_;
  // (problem id, iteration, sample_index)
  std::map<std::tuple<std::string, int, int>, Attempt> attempts_;
};

/// Durable per-iteration state.
struct IterationSnapshot {
  int iteration = 0;
  std::vector<std::string> problem_ids;
  std::map<std::string, int> attempt_counts;
  std::map<std::string, PassRate> pass_rates;
  json solver_model;  // ModelRef as recorded by the registry
  json rng;

  bool operator==(const IterationSnapshot&) const = default;
};

json to_json(const IterationSnapshot& s);
IterationSnapshot snapshot_from_json(const json& j);

namespace pool_files {
inline constexpr const char* kProblems = "problems.jsonl";
inline constexpr const char* kAttempts = "attempts.jsonl";
inline constexpr const char* kPassRates = "pass_rates.json";
inline constexpr const char* kSnapshot = "snapshot.json";
}  // namespace pool_files

/// Writes problems, attempts of `iteration`, pass rates (when complete) and
/// the snapshot into `dir`.
IterationSnapshot snapshot(const DataPool& pool, int iteration, int k_trn, const fs::path& dir,
                           const json& solver_model = json::object(),
                           const json& rng = json::object());

/// Reloads a pool written by snapshot(). Throws SchemaError on version
/// mismatch or corruption.
DataPool load_pool(const fs::path& dir);
IterationSnapshot load_snapshot(const fs::path& dir);

void write_pass_rates(const fs::path& path, const std::map<std::string, PassRate>& table,
                      int k_trn, double tau_easy, double tau_medium);

}  // namespace psv
