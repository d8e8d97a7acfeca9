#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "hvil/core.hpp"
#include "hvil/hvil.hpp"

namespace hvil {

struct OraclePolicy {
  std::size_t window_k = 50;
  int max_rounds = 3;
  double strongness_quantile = 0.9;
  double noise_rate = 0.0;
  // Simulated browsing speed; the oracle clock advances by this much per
  // inspected position.
  double seconds_per_item = 0.5;

  void validate() const;
};

/// Simulated annotator. Marks the best-ranked true match inside the window;
/// otherwise marks as strong negative the window item at the configured
/// dissimilarity quantile, measured between identity centroids when the
/// dataset carries them and between raw features otherwise.
class SimulatedOracle : public FeedbackSource {
 public:
  SimulatedOracle(const Dataset& dataset, OraclePolicy policy, std::uint64_t seed);

  std::optional<FeedbackEvent> next_feedback(const Item& probe, const RankedList& ranking, int round) override;
  double now() override { return clock_; }

  const OraclePolicy& policy() const { return policy_; }

 private:
  double dissimilarity(const Item& probe, const Item& item) const;

  const Dataset& dataset_;
  OraclePolicy policy_;
  std::mt19937_64 rng_;
  double clock_ = 0.0;
};

/// Plays back a recorded probe log.
class ReplaySource : public FeedbackSource {
 public:
  explicit ReplaySource(const ProbeLog& log) : log_(log) {}

  std::optional<FeedbackEvent> next_feedback(const Item& probe, const RankedList& ranking, int round) override;
  double now() override { return log_.presented_at; }

 private:
  const ProbeLog& log_;
};

}  // namespace hvil
