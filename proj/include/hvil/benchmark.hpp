#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "hvil/core.hpp"
#include "hvil/hvil.hpp"
#include "hvil/json_io.hpp"
#include "hvil/oracle.hpp"
#include "hvil/rmel.hpp"

namespace hvil {

struct BenchmarkConfig {
  HvilConfig hvil;
  OraclePolicy policy;
  RmelConfig rmel;
  std::size_t hil_probes = 100;
  std::size_t hol_probes = 100;
  bool shuffle = true;  // permute the probe order with the run seed

  void validate() const;
};

void to_json(Json& j, const BenchmarkConfig& c);
void from_json(const Json& j, BenchmarkConfig& c);

struct BenchmarkRun {
  Json report;
  std::vector<ProbeLog> logs;
  std::vector<MetricModel> weak_models;
  VerifiedPairSet verified;
  std::optional<EnsembleModel> ensemble;
};

/// HIL sessions driven by the simulated oracle over the first `hil_probes`
/// probes, then HOL evaluation of L2, the final model, the weak-model
/// average and the RMEL ensemble on the next `hol_probes` probes.
BenchmarkRun run_benchmark(const Dataset& dataset, const BenchmarkConfig& config, std::uint64_t seed);

/// Same pipeline with feedback read from recorded logs instead of the oracle.
BenchmarkRun replay_benchmark(const Dataset& dataset, const BenchmarkConfig& config, std::uint64_t seed,
                              const std::vector<ProbeLog>& logs);

/// Medians of the headline metrics across per-seed reports.
Json aggregate_reports(const std::vector<Json>& reports);

/// Probe indices in evaluation order for a seed.
std::vector<std::size_t> probe_order(std::size_t n_probes, bool shuffle, std::uint64_t seed);

}  // namespace hvil
