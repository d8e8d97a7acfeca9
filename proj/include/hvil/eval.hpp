#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <unordered_set>
#include <vector>

#include "hvil/core.hpp"
#include "hvil/hvil.hpp"

namespace hvil {

/// Gallery item ids depicting the probe's identity.
using MatchSet = std::unordered_set<std::string>;

std::vector<MatchSet> match_sets(const Dataset& dataset, const ItemSet& probes);

/// 0-based display positions of the true matches, ascending.
std::vector<std::size_t> match_positions(const RankedList& list, const MatchSet& truth);

struct CmcCurve {
  std::vector<double> rates;  // rates[k - 1] is the Rank-k rate
  std::size_t evaluated = 0;
  std::size_t excluded = 0;   // probes without any match in the gallery

  /// Rank-k recognition rate, k >= 1. Past the end the curve is flat.
  double rank(std::size_t k) const;
};

CmcCurve cmc(const std::vector<RankedList>& lists, const std::vector<MatchSet>& truth);

/// Mean 1-based position of every true match, pooled over probes.
double expected_rank(const std::vector<RankedList>& lists, const std::vector<MatchSet>& truth);

/// Average precision of one ranked list (0 without matches).
double average_precision(const RankedList& list, const MatchSet& truth);
double mean_average_precision(const std::vector<RankedList>& lists, const std::vector<MatchSet>& truth);

struct EffortStats {
  bool empty = true;
  std::size_t probes = 0;
  double found_matches_pct = 0.0;
  double mean_browsed_images = 0.0;
  double mean_feedback_count = 0.0;
  double mean_search_time_sec = 0.0;
};

/// Browsed images per probe: each round's selection position (1-based)
/// summed over rounds; a probe with no feedback counts its whole window.
EffortStats effort_stats(const std::vector<ProbeLog>& logs);

/// Images an operator would browse without feedback: mean 1-based position of
/// the best-ranked true match.
double exhaustive_search_browsed(const std::vector<RankedList>& lists, const std::vector<MatchSet>& truth);

struct RankingSummary {
  CmcCurve curve;
  double expected_rank = 0.0;
  double map = 0.0;
};

RankingSummary summarize(const std::vector<RankedList>& lists, const std::vector<MatchSet>& truth);

/// Plot-ready CSV with header `rank,rate`.
void write_cmc_csv(std::ostream& out, const CmcCurve& curve);

}  // namespace hvil
