#include "psv/eval.hpp"

#include <cmath>

#include "psv/parallel.hpp"

namespace psv {

double pass_at_k(int n, int c, int k) {
  if (n < 0 || c < 0 || c > n) throw Error("pass_at_k needs 0 <= c <= n");
  if (k < 1 || k > n) throw Error("pass_at_k needs 1 <= k <= n");
  if (c == 0) return 0.0;
  if (n - c < k) return 1.0;
  // The product below telescopes to (n - c) / n for k = 1; return it exactly.
  if (k == 1) return static_cast<double>(c) / n;
  double miss = 1.0;
  for (int i = n - c + 1; i <= n; ++i) miss *= 1.0 - static_cast<double>(k) / i;
  return 1.0 - miss;
}

DatasetMetrics metrics_from_counts(int n, const std::map<std::string, int>& counts,
                                   const std::vector<int>& ks) {
  DatasetMetrics m;
  m.n = n;
  m.counts = counts;
  for (int k : ks) {
    if (k > n) continue;
    double sum = 0.0;
    for (const auto& [id, c] : counts) sum += pass_at_k(n, c, k);
    m.pass_at[k] = counts.empty() ? 0.0 : sum / static_cast<double>(counts.size());
  }
  return m;
}

json MetricsTable::to_json() const {
  json pass = json::object();
  json counts = json::object();
  json ns = json::object();
  for (const auto& [name, m] : datasets) {
    json row = json::object();
    for (const auto& [k, v] : m.pass_at) row[std::to_string(k)] = v;
    pass[name] = row;
    counts[name] = m.counts;
    ns[name] = m.n;
  }
  return {{"schema_version", kSchemaVersion},
          {"model", model_label},
          {"n", ns},
          {"pass_at_k", pass},
          {"counts", counts}};
}

MetricsTable MetricsTable::from_json(const json& j) {
  MetricsTable t;
  t.model_label = j.value("model", "");
  for (const auto& [name, row] : j.at("pass_at_k").items()) {
    DatasetMetrics m;
    m.n = j.at("n").at(name).get<int>();
    for (const auto& [k, v] : row.items()) m.pass_at[std::stoi(k)] = v.get<double>();
    m.counts = j.at("counts").at(name).get<std::map<std::string, int>>();
    t.datasets[name] = std::move(m);
  }
  return t;
}

MetricsTable evaluate(const std::map<std::string, std::vector<ProblemSpec>>& datasets,
                      const GenerationBackend& backend, const ModelRef& model,
                      const VerificationBackend& verifier, const EvalOptions& options) {
  if (options.n < 1) throw Error("evaluation needs n >= 1");
  for (int k : options.ks) {
    if (k < 1 || k > options.n) throw Error("evaluation k must lie in [1, n]");
  }
  MetricsTable table;
  table.model_label = model.label;
  const std::uint64_t stream = derive_seed(options.seed, "eval");
  for (const auto& [name, specs] : datasets) {
    std::vector<std::vector<std::string>> samples(specs.size());
    parallel_for(specs.size(), options.max_in_flight, [&](std::size_t i) {
      samples[i] = sample_solutions(backend, model, specs[i], options.n, options.sampling, stream,
                                    "eval/" + name + "/" + specs[i].id);
    });
    std::vector<VerifyJob> jobs;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      for (const auto& code : samples[i]) jobs.push_back({&specs[i], code});
    }
    const auto verdicts = verify_batch(verifier, jobs, options.max_in_flight);
    std::map<std::string, int> counts;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      int c = 0;
      for (int j = 0; j < options.n; ++j) {
        if (verdicts[i * static_cast<std::size_t>(options.n) + static_cast<std::size_t>(j)].verified()) ++c;
      }
      counts[specs[i].id] = c;
    }
    table.datasets[name] = metrics_from_counts(options.n, counts, options.ks);
  }
  return table;
}

AggregateTable aggregate_seeds(const std::vector<MetricsTable>& tables) {
  if (tables.empty()) throw Error("aggregate_seeds needs at least one table");
  const auto& first = tables.front();
  for (const auto& t : tables) {
    if (t.datasets.size() != first.datasets.size()) throw Error("metrics tables differ in shape");
    for (const auto& [name, m] : first.datasets) {
      auto it = t.datasets.find(name);
      if (it == t.datasets.end() || it->second.pass_at.size() != m.pass_at.size()) {
        throw Error("metrics tables differ in shape");
      }
      for (const auto& [k, v] : m.pass_at) {
        if (!it->second.pass_at.contains(k)) throw Error("metrics tables differ in shape");
      }
    }
  }
  const double m = static_cast<double>(tables.size());
  AggregateTable out;
  for (const auto& [name, dm] : first.datasets) {
    for (const auto& [k, v0] : dm.pass_at) {
      double sum = 0.0;
      for (const auto& t : tables) sum += t.datasets.at(name).pass_at.at(k);
      const double mean = sum / m;
      AggregateCell cell{mean, std::nullopt};
      if (tables.size() > 1) {
        double ss = 0.0;
        for (const auto& t : tables) {
          const double d = t.datasets.at(name).pass_at.at(k) - mean;
          ss += d * d;
        }
        cell.std_err = std::sqrt(ss / (m - 1.0)) / std::sqrt(m);
      }
      out[name][k] = cell;
    }
  }
  return out;
}

json to_json(const AggregateTable& t) {
  json out = json::object();
  for (const auto& [name, row] : t) {
    json r = json::object();
    for (const auto& [k, cell] : row) {
      json c = {{"mean", cell.mean}};
      if (cell.std_err) c["std_err"] = *cell.std_err;
      r[std::to_string(k)] = c;
    }
    out[name] = r;
  }
  return out;
}

}  // namespace psv
