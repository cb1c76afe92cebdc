#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "psv/common.hpp"
#include "psv/datapool.hpp"

namespace psv {

struct BackendConfig {
  std::string kind = "http";  // http | scripted | toy
  std::string endpoint = "http://127.0.0.1:30000";
  std::string path = "/v1/chat/completions";
  std::string model = "Qwen/Qwen2.5-Coder-3B-Instruct";
  std::string transcript;  // scripted
  int max_in_flight = 0;
  int max_tokens = 2048;
  double temperature = 0.8;
  double initial_backoff_seconds = 1.0;
};

struct VerifierConfig {
  std::string kind = "verus";  // verus | toy
  std::string binary;
  double timeout_seconds = 60.0;
  int max_in_flight = 0;
  std::vector<std::string> extra_args{"--crate-type=lib"};
};

struct RunConfig {
  int T = 5;
  int B = 200;
  int k_trn = 10;
  int k_prop = 12;
  double tau_E = 0.8;
  double tau_M = 0.2;
  int eval_n = 100;
  std::vector<int> eval_ks{1, 5, 10};
  bool eval_enabled = true;
  /// Extra held-out evaluation sets: name -> spec file or directory.
  std::map<std::string, std::string> eval_datasets;
  bool eval_seed_set = true;
  std::uint64_t seed = 0;

  bool verification_on = true;
  bool difficulty_labels_on = true;
  bool context_resampling_on = true;
  std::vector<Difficulty> targets{std::begin(kAllDifficulties), std::end(kAllDifficulties)};

  /// Seed specifications X_0: a .jsonl of {"text": ...} or a directory of .rs files.
  std::string seeds;
  std::string solver_exemplar;  // path; empty uses the built-in placeholder

  BackendConfig generation;
  BackendConfig proposer;  // defaults to generation's settings when absent
  VerifierConfig verifier;

  std::vector<std::string> trainer_command;  // empty: in-process mock trainer
  double trainer_timeout_seconds = 0.0;
  double toy_p0 = 0.1;
  double toy_gamma = 0.15;
  std::size_t rft_spot_check = 8;

  /// Parses and validates. Relative paths resolve against `base_dir`.
  /// Keys may be nested objects or dotted ("generation.endpoint").
  static RunConfig from_json(const json& j, const fs::path& base_dir = {});
  static RunConfig load(const fs::path& path);
  json to_json() const;
  /// Canonical text written as config.snapshot.
  std::string snapshot_text() const;
  std::string hash() const;
  /// Throws ConfigError on violated invariants.
  void validate() const;
};

}  // namespace psv
