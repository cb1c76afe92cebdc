#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "psv/common.hpp"
#include "psv/datapool.hpp"
#include "psv/toy.hpp"
#include "psv/verdict.hpp"

namespace psv {

struct VerifierCapabilities {
  bool solution_check = true;
  bool spec_only_check = true;
};

/// v(x, y) -> verdict. Implementations must be safe for concurrent use and
/// deterministic for a fixed program and tool version, Timeout aside.
class VerificationBackend {
 public:
  virtual ~VerificationBackend() = default;

  virtual std::string name() const = 0;
  /// Tool version string, recorded in every run directory.
  virtual std::string version() const = 0;
  virtual VerifierCapabilities capabilities() const { return {}; }

  virtual VerifierVerdict verify_solution(const ProblemSpec& spec, std::string_view code) const = 0;
  /// Checks the spec alone through an external-body stub.
  virtual VerifierVerdict verify_spec_only(const ProblemSpec& spec) const = 0;
};

/// Rejection diagnostic when `code` does not carry `spec` unchanged, or
/// std::nullopt when it does. A solution must not edit its own contract.
std::optional<std::string> spec_mismatch(const ProblemSpec& spec, std::string_view code);

/// Runs verify_spec_only and records the outcome in spec.validity.
/// Timeout and ToolError leave the spec invalid.
VerifierVerdict check_spec_validity(const VerificationBackend& backend, ProblemSpec& spec);

/// Exact verifier for the toy domain: exhaustive evaluation over the
/// declared input interval.
VerifierVerdict synthetic_oracle_verify(const toy::ToySpec& spec, std::string_view solution_expr,
                                        const Clock& clock = default_clock());

class ToyOracleBackend final : public VerificationBackend {
 public:
  explicit ToyOracleBackend(const Clock& clock = default_clock()) : clock_(&clock) {}

  std::string name() const override { return "toy-oracle"; }
  std::string version() const override { return "toy-oracle 1"; }
  VerifierVerdict verify_solution(const ProblemSpec& spec, std::string_view code) const override;
  VerifierVerdict verify_spec_only(const ProblemSpec& spec) const override;

 private:
  const Clock* clock_;
};

/// Memoizes verdicts keyed by hash(kind, spec, code, tool version).
/// Timeout and ToolError are never cached.
class CachingVerifier final : public VerificationBackend {
 public:
  explicit CachingVerifier(std::shared_ptr<const VerificationBackend> inner)
      : inner_(std::move(inner)) {}

  std::string name() const override { return inner_->name(); }
  std::string version() const override { return inner_->version(); }
  VerifierCapabilities capabilities() const override { return inner_->capabilities(); }
  VerifierVerdict verify_solution(const ProblemSpec& spec, std::string_view code) const override;
  VerifierVerdict verify_spec_only(const ProblemSpec& spec) const override;

  std::size_t cache_size() const;
  std::size_t hits() const;

 private:
  std::optional<VerifierVerdict> lookup(const std::string& key) const;
  void store(const std::string& key, const VerifierVerdict& v) const;

  std::shared_ptr<const VerificationBackend> inner_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, VerifierVerdict> cache_;
  mutable std::size_t hits_ = 0;
};

struct VerifyJob {
  const ProblemSpec* spec = nullptr;
  std::string_view code;
};

/// Verifies jobs with at most `max_in_flight` concurrent checks (<= 0 means
/// one per logical core). Output order matches input order. An exception
/// thrown by the backend becomes a ToolError verdict.
std::vector<VerifierVerdict> verify_batch(const VerificationBackend& backend,
                                          std::span<const VerifyJob> jobs, int max_in_flight);

/// Serial reference for verify_batch.
std::vector<VerifierVerdict> verify_batch_serial(const VerificationBackend& backend,
                                                 std::span<const VerifyJob> jobs);

}  // namespace psv
