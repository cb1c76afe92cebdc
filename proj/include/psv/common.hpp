#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace psv {

namespace fs = std::filesystem;
using json = nlohmann::json;

/// Version stamped into every persisted record.
inline constexpr int kSchemaVersion = 1;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Persisted file has the wrong schema or cannot be parsed.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A generation backend failed after exhausting retries.
class BackendError : public Error {
 public:
  using Error::Error;
};

std::string sha256_hex(std::string_view data);

/// 64-bit mixer used to derive independent, stateless random streams.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t base, std::string_view label);
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a);
/// Uniform double in [0, 1) from a 64-bit key.
double unit_interval(std::uint64_t key);

/// Unbiased integer in [0, bound) drawn from a 64-bit generator.
template <class Engine>
std::uint64_t bounded(Engine& engine, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t v;
  do {
    v = engine();
  } while (v >= limit);
  return v % bound;
}

std::string read_file(const fs::path& path);
/// Writes via a temporary sibling and rename so readers never see a partial file.
void write_file_atomic(const fs::path& path, std::string_view content);

std::vector<json> read_jsonl(const fs::path& path);
void write_jsonl(const fs::path& path, const std::vector<json>& records);

/// Throws SchemaError unless `record["schema_version"] == kSchemaVersion`.
void check_schema(const json& record, const fs::path& source);

/// Wall clock abstraction so tests can pin timing fields.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual double now_seconds() const = 0;
};

class SteadyClock final : public Clock {
 public:
  double now_seconds() const override;
};

/// Always reports zero elapsed time.
class FrozenClock final : public Clock {
 public:
  double now_seconds() const override { return 0.0; }
};

const Clock& default_clock();

std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

}  // namespace psv
