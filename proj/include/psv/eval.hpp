#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "psv/datapool.hpp"
#include "psv/generation.hpp"
#include "psv/verifier.hpp"

namespace psv {

/// Unbiased pass@k = 1 - C(n-c, k) / C(n, k), evaluated as a running
/// product. Requires 0 <= c <= n and 1 <= k <= n.
double pass_at_k(int n, int c, int k);

struct DatasetMetrics {
  int n = 0;
  std::map<int, double> pass_at;      // k -> dataset mean
  std::map<std::string, int> counts;  // problem id -> verified samples

  bool operator==(const DatasetMetrics&) const = default;
};

/// dataset name -> metrics for one model and one seed.
struct MetricsTable {
  std::string model_label;
  std::map<std::string, DatasetMetrics> datasets;

  json to_json() const;
  static MetricsTable from_json(const json& j);
  bool operator==(const MetricsTable&) const = default;
};

/// Per-dataset means from raw counts; recomputes any k post hoc.
DatasetMetrics metrics_from_counts(int n, const std::map<std::string, int>& counts,
                                   const std::vector<int>& ks);

struct EvalOptions {
  int n = 100;
  std::vector<int> ks{1, 5, 10};
  std::uint64_t seed = 0;
  SamplingConfig sampling;
  int max_in_flight = 0;
};

/// Samples n solutions per spec, verifies them and reports pass@k means.
/// Uses its own random stream; nothing here touches a training pool.
MetricsTable evaluate(const std::map<std::string, std::vector<ProblemSpec>>& datasets,
                      const GenerationBackend& backend, const ModelRef& model,
                      const VerificationBackend& verifier, const EvalOptions& options);

struct AggregateCell {
  double mean = 0.0;
  /// Standard error of the mean across seeds; absent for a single seed.
  std::optional<double> std_err;
};

using AggregateTable = std::map<std::string, std::map<int, AggregateCell>>;

/// Cell-wise mean and sample-standard-deviation / sqrt(m). Throws when the
/// tables do not share datasets and k values.
AggregateTable aggregate_seeds(const std::vector<MetricsTable>& tables);

json to_json(const AggregateTable& t);

}  // namespace psv
