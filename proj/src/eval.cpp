#include "hvil/eval.hpp"

#include <algorithm>
#include <iomanip>
#include <iostream>
#include <limits>

#include "hvil/error.hpp"

namespace hvil {

namespace {

void check_sizes(const std::vector<RankedList>& lists, const std::vector<MatchSet>& truth) {
  if (lists.size() != truth.size()) {
    throw Error(ErrorCode::kInvalidArgument, "ranked lists and truth sets differ in length");
  }
}

}  // namespace

std::vector<MatchSet> match_sets(const Dataset& dataset, const ItemSet& probes) {
  std::vector<MatchSet> out;
  out.reserve(probes.size());
  for (const auto& probe : probes) {
    MatchSet matches;
    for (std::size_t i : dataset.true_matches(probe)) matches.insert(dataset.gallery[i].item_id);
    out.push_back(std::move(matches));
  }
  return out;
}

std::vector<std::size_t> match_positions(const RankedList& list, const MatchSet& truth) {
  std::vector<std::size_t> out;
  for (std::size_t pos = 0; pos < list.size() && out.size() < truth.size(); ++pos) {
    if (truth.contains(list[pos].item_id)) out.push_back(pos);
  }
  return out;
}

double CmcCurve::rank(std::size_t k) const {
  if (k == 0) throw Error(ErrorCode::kInvalidArgument, "CMC ranks start at 1");
  if (rates.empty()) return 0.0;
  return rates[std::min(k, rates.size()) - 1];
}

CmcCurve cmc(const std::vector<RankedList>& lists, const std::vector<MatchSet>& truth) {
  check_sizes(lists, truth);
  CmcCurve curve;
  std::size_t length = 0;
  for (const auto& list : lists) length = std::max(length, list.size());
  std::vector<std::size_t> hits(length + 1, 0);
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const auto positions = match_positions(lists[i], truth[i]);
    if (positions.empty()) {
      ++curve.excluded;
      continue;
    }
    ++curve.evaluated;
    ++hits[positions.front()];
  }
  if (curve.excluded > 0) {
    std::clog << "warning: " << curve.excluded << " probe(s) without a gallery match excluded from CMC\n";
  }
  curve.rates.resize(length, 0.0);
  std::size_t cumulative = 0;
  for (std::size_t k = 0; k < length; ++k) {
    cumulative += hits[k];
    curve.rates[k] = curve.evaluated == 0
                         ? 0.0
                         : static_cast<double>(cumulative) / static_cast<double>(curve.evaluated);
  }
  return curve;
}

double expected_rank(const std::vector<RankedList>& lists, const std::vector<MatchSet>& truth) {
  check_sizes(lists, truth);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    for (std::size_t pos : match_positions(lists[i], truth[i])) {
      sum += static_cast<double>(pos + 1);
      ++count;
    }
  }
  return count == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(count);
}

double average_precision(const RankedList& list, const MatchSet& truth) {
  const auto positions = match_positions(list, truth);
  if (positions.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t h = 0; h < positions.size(); ++h) {
    sum += static_cast<double>(h + 1) / static_cast<double>(positions[h] + 1);
  }
  return sum / static_cast<double>(positions.size());
}

double mean_average_precision(const std::vector<RankedList>& lists, const std::vector<MatchSet>& truth) {
  check_sizes(lists, truth);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    if (match_positions(lists[i], truth[i]).empty()) continue;
    sum += average_precision(lists[i], truth[i]);
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

EffortStats effort_stats(const std::vector<ProbeLog>& logs) {
  EffortStats stats;
  stats.probes = logs.size();
  if (logs.empty()) return stats;
  stats.empty = false;
  std::size_t found = 0;
  double browsed = 0.0, feedback = 0.0, seconds = 0.0;
  for (const auto& log : logs) {
    const bool matched = std::any_of(log.events.begin(), log.events.end(), [](const FeedbackEvent& e) {
      return e.label == FeedbackLabel::kTrueMatch;
    });
    if (matched) ++found;
    feedback += static_cast<double>(log.events.size());
    if (log.events.empty()) {
      browsed += static_cast<double>(log.window_k);
    } else {
      for (const auto& e : log.events) browsed += static_cast<double>(e.rank_at_selection + 1);
      seconds += log.events.back().wall_time - log.presented_at;
    }
  }
  const double n = static_cast<double>(logs.size());
  stats.found_matches_pct = 100.0 * static_cast<double>(found) / n;
  stats.mean_browsed_images = browsed / n;
  stats.mean_feedback_count = feedback / n;
  stats.mean_search_time_sec = seconds / n;
  return stats;
}

double exhaustive_search_browsed(const std::vector<RankedList>& lists, const std::vector<MatchSet>& truth) {
  check_sizes(lists, truth);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < lists.size(); ++i) {
    const auto positions = match_positions(lists[i], truth[i]);
    if (positions.empty()) continue;
    sum += static_cast<double>(positions.front() + 1);
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

RankingSummary summarize(const std::vector<RankedList>& lists, const std::vector<MatchSet>& truth) {
  return {cmc(lists, truth), expected_rank(lists, truth), mean_average_precision(lists, truth)};
}

void write_cmc_csv(std::ostream& out, const CmcCurve& curve) {
  out << "rank,rate\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < curve.rates.size(); ++k) out << (k + 1) << ',' << curve.rates[k] << '\n';
}

}  // namespace hvil
