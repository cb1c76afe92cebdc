#include "psv/verifier.hpp"

#include "psv/parallel.hpp"
#include "psv/specpipe.hpp"

namespace psv {

std::optional<std::string> spec_mismatch(const ProblemSpec& spec, std::string_view code) {
  std::string carried;
  try {
    carried = specpipe::extract_spec(code);
  } catch (const specpipe::SpecError& e) {
    return std::string("cannot locate target function: ") + e.what();
  }
  if (specpipe::normalize(carried) != spec.canonical) {
    return "solution does not preserve the specification";
  }
  return std::nullopt;
}

VerifierVerdict check_spec_validity(const VerificationBackend& backend, ProblemSpec& spec) {
  auto verdict = backend.verify_spec_only(spec);
  if (verdict.verified()) {
    spec.validity = Validity::valid();
  } else {
    spec.validity = Validity::invalid(std::string(to_string(verdict.status)) + ": " +
                                      verdict.diagnostics);
  }
  return verdict;
}

VerifierVerdict synthetic_oracle_verify(const toy::ToySpec& spec, std::string_view solution_expr,
                                        const Clock& clock) {
  const double start = clock.now_seconds();
  const auto r = toy::check_expression(spec, solution_expr);
  const double elapsed = clock.now_seconds() - start;
  switch (r.outcome) {
    case toy::OracleOutcome::Agree:
      return VerifierVerdict::verified_in(elapsed);
    case toy::OracleOutcome::ParseFailure:
      return VerifierVerdict::rejected("parse: " + r.diagnostics, elapsed);
    case toy::OracleOutcome::Disagree:
      break;
  }
  return VerifierVerdict::rejected(r.diagnostics, elapsed);
}

VerifierVerdict ToyOracleBackend::verify_solution(const ProblemSpec& spec,
                                                  std::string_view code) const {
  const double start = clock_->now_seconds();
  auto elapsed = [&] { return clock_->now_seconds() - start; };
  if (trim(code).empty()) return VerifierVerdict::rejected("empty program", elapsed());
  toy::ToySpec toy_spec;
  try {
    toy_spec = toy::ToySpec::parse(spec.text);
  } catch (const toy::ParseError& e) {
    return VerifierVerdict::rejected(std::string("specification: ") + e.what(), elapsed());
  }
  if (auto why = spec_mismatch(spec, code)) return VerifierVerdict::rejected(*why, elapsed());
  std::string body;
  try {
    body = specpipe::extract_body(code);
  } catch (const specpipe::SpecError& e) {
    return VerifierVerdict::rejected(std::string("parse: ") + e.what(), elapsed());
  }
  auto v = synthetic_oracle_verify(toy_spec, body, *clock_);
  v.wall_time = elapsed();
  return v;
}

VerifierVerdict ToyOracleBackend::verify_spec_only(const ProblemSpec& spec) const {
  const double start = clock_->now_seconds();
  try {
    (void)toy::ToySpec::parse(spec.text);
  } catch (const toy::ParseError& e) {
    return VerifierVerdict::rejected(e.what(), clock_->now_seconds() - start);
  }
  return VerifierVerdict::verified_in(clock_->now_seconds() - start);
}

namespace {

std::string cache_key(std::string_view kind, const ProblemSpec& spec, std::string_view code,
                      const std::string& version) {
  std::string material;
  material.reserve(spec.text.size() + code.size() + version.size() + 16);
  material += kind;
  material += '\0';
  material += spec.text;
  material += '\0';
  material += code;
  material += '\0';
  material += version;
  return sha256_hex(material);
}

bool cacheable(const VerifierVerdict& v) {
  return v.status == VerdictStatus::Verified || v.status == VerdictStatus::Rejected;
}

}  // namespace

std::optional<VerifierVerdict> CachingVerifier::lookup(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = cache_.find(key);
  if (it == cache_.end()) return std::nullopt;
  ++hits_;
  return it->second;
}

void CachingVerifier::store(const std::string& key, const VerifierVerdict& v) const {
  if (!cacheable(v)) return;
  std::lock_guard lock(mutex_);
  cache_.insert_or_assign(key, v);
}

VerifierVerdict CachingVerifier::verify_solution(const ProblemSpec& spec,
                                                 std::string_view code) const {
  const auto key = cache_key("solution", spec, code, inner_->version());
  if (auto hit = lookup(key)) return *hit;
  auto v = inner_->verify_solution(spec, code);
  store(key, v);
  return v;
}

VerifierVerdict CachingVerifier::verify_spec_only(const ProblemSpec& spec) const {
  const auto key = cache_key("spec", spec, {}, inner_->version());
  if (auto hit = lookup(key)) return *hit;
  auto v = inner_->verify_spec_only(spec);
  store(key, v);
  return v;
}

std::size_t CachingVerifier::cache_size() const {
  std::lock_guard lock(mutex_);
  return cache_.size();
}

std::size_t CachingVerifier::hits() const {
  std::lock_guard lock(mutex_);
  return hits_;
}

namespace {

VerifierVerdict guarded_verify(const VerificationBackend& backend, const VerifyJob& job) {
  try {
    return backend.verify_solution(*job.spec, job.code);
  } catch (const std::exception& e) {
    return VerifierVerdict::tool_error(e.what());
  }
}

}  // namespace

std::vector<VerifierVerdict> verify_batch(const VerificationBackend& backend,
                                          std::span<const VerifyJob> jobs, int max_in_flight) {
  std::vector<VerifierVerdict> out(jobs.size());
  parallel_for(jobs.size(), max_in_flight,
               [&](std::size_t i) { out[i] = guarded_verify(backend, jobs[i]); });
  return out;
}

std::vector<VerifierVerdict> verify_batch_serial(const VerificationBackend& backend,
                                                 std::span<const VerifyJob> jobs) {
  std::vector<VerifierVerdict> out(jobs.size());
  serial_for(jobs.size(), [&](std::size_t i) { out[i] = guarded_verify(backend, jobs[i]); });
  return out;
}

}  // namespace psv
