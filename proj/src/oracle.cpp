#include "hvil/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "hvil/error.hpp"

namespace hvil {

void OraclePolicy::validate() const {
  if (window_k < 1) throw Error(ErrorCode::kInvalidArgument, "oracle window_k must be >= 1");
  if (max_rounds < 1) throw Error(ErrorCode::kInvalidArgument, "oracle max_rounds must be >= 1");
  if (!(strongness_quantile > 0.0 && strongness_quantile <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "strongness_quantile must be in (0, 1]");
  }
  if (!(noise_rate >= 0.0 && noise_rate < 1.0)) throw Error(ErrorCode::kInvalidArgument, "noise_rate must be in [0, 1)");
  if (!(seconds_per_item >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "seconds_per_item must be >= 0");
}

SimulatedOracle::SimulatedOracle(const Dataset& dataset, OraclePolicy policy, std::uint64_t seed)
    : dataset_(dataset), policy_(policy), rng_(seed) {
  policy_.validate();
}

double SimulatedOracle::dissimilarity(const Item& probe, const Item& item) const {
  const auto a = dataset_.ground_truth.find(probe.person);
  const auto b = dataset_.ground_truth.find(item.person);
  if (a != dataset_.ground_truth.end() && b != dataset_.ground_truth.end()) return (a->second - b->second).norm();
  return (probe.feature - item.feature).norm();
}

std::optional<FeedbackEvent> SimulatedOracle::next_feedback(const Item& probe, const RankedList& ranking,
                                                            int round) {
  if (round >= policy_.max_rounds || ranking.size() == 0) return std::nullopt;
  const std::size_t window = std::min(policy_.window_k, ranking.size());
  const double draw = std::uniform_real_distribution<double>(0.0, 1.0)(rng_);

  std::size_t position = 0;
  FeedbackLabel label = FeedbackLabel::kStrongNegative;
  const auto is_match = [&](std::size_t pos) { return dataset_.gallery[ranking[pos].index].person == probe.person; };

  if (draw < policy_.noise_rate) {
    position = std::uniform_int_distribution<std::size_t>(0, window - 1)(rng_);
    label = is_match(position) ? FeedbackLabel::kTrueMatch : FeedbackLabel::kStrongNegative;
  } else {
    std::optional<std::size_t> match;
    for (std::size_t pos = 0; pos < window && !match; ++pos) {
      if (is_match(pos)) match = pos;
    }
    if (match) {
      position = *match;
      label = FeedbackLabel::kTrueMatch;
    } else {
      std::vector<std::pair<double, std::size_t>> order;
      order.reserve(window);
      for (std::size_t pos = 0; pos < window; ++pos) {
        order.emplace_back(dissimilarity(probe, dataset_.gallery[ranking[pos].index]), pos);
      }
      std::sort(order.begin(), order.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return ranking[a.second].item_id < ranking[b.second].item_id;
      });
      const auto q = static_cast<std::size_t>(std::ceil(policy_.strongness_quantile * static_cast<double>(window)));
      position = order[std::clamp<std::size_t>(q, 1, window) - 1].second;
    }
  }

  clock_ += static_cast<double>(position + 1) * policy_.seconds_per_item;
  return FeedbackEvent{probe.item_id, ranking[position].item_id, label, clock_, position};
}

std::optional<FeedbackEvent> ReplaySource::next_feedback(const Item& probe, const RankedList& /*ranking*/,
                                                         int round) {
  if (round < 0 || static_cast<std::size_t>(round) >= log_.events.size()) return std::nullopt;
  const auto& event = log_.events[static_cast<std::size_t>(round)];
  if (event.probe_id != probe.item_id) {
    throw Error(ErrorCode::kInvalidArgument, "replayed event belongs to probe '" + event.probe_id + "'");
  }
  return event;
}

}  // namespace hvil
