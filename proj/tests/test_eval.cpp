#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

#include "hvil/error.hpp"
#include "hvil/eval.hpp"
#include "test_util.hpp"

using namespace hvil;
using namespace hvil::testing;

namespace {

// Ranked list whose order is exactly `ids`.
RankedList list_of(const std::vector<std::string>& ids) {
  std::vector<RankedEntry> entries;
  for (std::size_t i = 0; i < ids.size(); ++i) entries.push_back({ids[i], i, -static_cast<double>(i)});
  return RankedList(entries);
}

std::vector<std::string> names(int n) {
  std::vector<std::string> out;
  for (int i = 0; i < n; ++i) out.push_back(item_name("g", i));
  return out;
}

}  // namespace

TEST(Cmc, SmallExample) {
  const auto ids = names(5);
  const std::vector<RankedList> lists{list_of(ids), list_of({ids[3], ids[4], ids[0], ids[1], ids[2]}), list_of(ids)};
  const std::vector<MatchSet> truth{{ids[0]}, {ids[0]}, {"absent"}};
  const auto c = cmc(lists, truth);
  EXPECT_EQ(c.evaluated, 2u);
  EXPECT_EQ(c.excluded, 1u);
  EXPECT_DOUBLE_EQ(c.rank(1), 0.5);
  EXPECT_DOUBLE_EQ(c.rank(2), 0.5);
  EXPECT_DOUBLE_EQ(c.rank(3), 1.0);
  EXPECT_DOUBLE_EQ(c.rank(100), 1.0);
  EXPECT_DOUBLE_EQ(expected_rank(lists, truth), 2.0);
}

TEST(Cmc, MatchesBruteForceAndIsMonotone) {
  std::mt19937_64 rng(1);
  for (int inst = 0; inst < 50; ++inst) {
    const int n = 5 + static_cast<int>(rng() % 30);
    const auto ids = names(n);
    std::vector<RankedList> lists;
    std::vector<MatchSet> truth;
    for (int p = 0; p < 10; ++p) {
      auto perm = ids;
      std::shuffle(perm.begin(), perm.end(), rng);
      lists.push_back(list_of(perm));
      MatchSet m;
      const int k = static_cast<int>(rng() % 3);
      for (int j = 0; j < k; ++j) m.insert(ids[rng() % ids.size()]);
      truth.push_back(m);
    }
    const auto c = cmc(lists, truth);
    std::size_t evaluated = 0;
    std::vector<std::size_t> first;
    double pooled = 0;
    std::size_t pooled_n = 0;
    for (std::size_t p = 0; p < lists.size(); ++p) {
      std::optional<std::size_t> best;
      for (std::size_t pos = 0; pos < lists[p].size(); ++pos) {
        if (truth[p].count(lists[p][pos].item_id)) {
          if (!best) best = pos;
          pooled += static_cast<double>(pos + 1);
          ++pooled_n;
        }
      }
      if (best) {
        ++evaluated;
        first.push_back(*best);
      }
    }
    EXPECT_EQ(c.evaluated, evaluated);
    for (std::size_t k = 1; k <= static_cast<std::size_t>(n); ++k) {
      const auto hits = std::count_if(first.begin(), first.end(), [&](std::size_t f) { return f < k; });
      const double expected = evaluated ? static_cast<double>(hits) / static_cast<double>(evaluated) : 0.0;
      EXPECT_NEAR(c.rank(k), expected, 1e-12);
      if (k > 1) EXPECT_GE(c.rank(k), c.rank(k - 1));
      EXPECT_GE(c.rank(k), 0.0);
      EXPECT_LE(c.rank(k), 1.0);
    }
    if (pooled_n) {
      EXPECT_NEAR(expected_rank(lists, truth), pooled / static_cast<double>(pooled_n), 1e-12);
    } else {
      EXPECT_TRUE(std::isnan(expected_rank(lists, truth)));
    }
  }
}

TEST(Map, AveragePrecisionExample) {
  const auto ids = names(5);
  EXPECT_NEAR(average_precision(list_of(ids), {ids[0], ids[2]}), (1.0 + 2.0 / 3.0) / 2.0, 1e-15);
  EXPECT_EQ(average_precision(list_of(ids), {}), 0.0);
  EXPECT_EQ(average_precision(list_of(ids), {ids[0]}), 1.0);
}

TEST(Map, MatchesBruteForceAndRelabelInvariant) {
  std::mt19937_64 rng(2);
  for (int inst = 0; inst < 50; ++inst) {
    const auto ids = names(20);
    std::vector<RankedList> lists, relabeled;
    std::vector<MatchSet> truth, truth2;
    double sum = 0;
    std::size_t counted = 0;
    for (int p = 0; p < 8; ++p) {
      auto perm = ids;
      std::shuffle(perm.begin(), perm.end(), rng);
      MatchSet m;
      for (int j = 0; j < 1 + static_cast<int>(rng() % 3); ++j) m.insert(ids[rng() % ids.size()]);
      lists.push_back(list_of(perm));
      truth.push_back(m);
      std::vector<std::string> renamed;
      for (const auto& s : perm) renamed.push_back("x" + s);
      MatchSet m2;
      for (const auto& s : m) m2.insert("x" + s);
      relabeled.push_back(list_of(renamed));
      truth2.push_back(m2);
      double hits = 0, ap = 0;
      for (std::size_t pos = 0; pos < perm.size(); ++pos) {
        if (m.count(perm[pos])) {
          ++hits;
          ap += hits / static_cast<double>(pos + 1);
        }
      }
      sum += ap / static_cast<double>(m.size());
      ++counted;
    }
    EXPECT_NEAR(mean_average_precision(lists, truth), sum / static_cast<double>(counted), 1e-12);
    EXPECT_DOUBLE_EQ(mean_average_precision(lists, truth), mean_average_precision(relabeled, truth2));
  }
}

TEST(ExpectedRank, RandomPermutationsCenterOnMidpoint) {
  std::mt19937_64 rng(3);
  const int n = 100;
  const auto ids = names(n);
  std::vector<RankedList> lists;
  std::vector<MatchSet> truth;
  for (int t = 0; t < 10000; ++t) {
    auto perm = ids;
    std::shuffle(perm.begin(), perm.end(), rng);
    lists.push_back(list_of(perm));
    truth.push_back({ids[0]});
  }
  EXPECT_NEAR(expected_rank(lists, truth), (n + 1) / 2.0, 0.05 * (n + 1) / 2.0);
}

TEST(Effort, EmptyLogsAreFlagged) {
  const auto s = effort_stats({});
  EXPECT_TRUE(s.empty);
  EXPECT_EQ(s.probes, 0u);
}

TEST(Effort, SingleProbeExample) {
  ProbeLog log{"p0", 10.0, 50, {}};
  log.events.push_back({"p0", "g1", FeedbackLabel::kStrongNegative, 12.0, 9});
  log.events.push_back({"p0", "g2", FeedbackLabel::kTrueMatch, 15.0, 4});
  const auto s = effort_stats({log});
  EXPECT_FALSE(s.empty);
  EXPECT_DOUBLE_EQ(s.found_matches_pct, 100.0);
  EXPECT_DOUBLE_EQ(s.mean_feedback_count, 2.0);
  EXPECT_DOUBLE_EQ(s.mean_browsed_images, 10.0 + 5.0);
  EXPECT_DOUBLE_EQ(s.mean_search_time_sec, 5.0);
}

TEST(Effort, ProbeWithoutFeedbackBrowsesWindow) {
  const ProbeLog a{"p0", 0.0, 50, {}};
  ProbeLog b{"p1", 0.0, 50, {}};
  b.events.push_back({"p1", "g0", FeedbackLabel::kTrueMatch, 1.0, 0});
  const auto s = effort_stats({a, b});
  EXPECT_DOUBLE_EQ(s.found_matches_pct, 50.0);
  EXPECT_DOUBLE_EQ(s.mean_browsed_images, (50.0 + 1.0) / 2.0);
  EXPECT_DOUBLE_EQ(s.mean_feedback_count, 0.5);
}

TEST(Effort, ExhaustiveSearchUsesFirstMatch) {
  const auto ids = names(6);
  const std::vector<RankedList> lists{list_of(ids), list_of(ids)};
  const std::vector<MatchSet> truth{{ids[3], ids[5]}, {ids[0]}};
  EXPECT_DOUBLE_EQ(exhaustive_search_browsed(lists, truth), (4.0 + 1.0) / 2.0);
}

TEST(Eval, MismatchedInputsThrow) {
  EXPECT_THROW(cmc({list_of(names(2))}, {}), Error);
}

TEST(Eval, CmcCsvHasHeader) {
  const auto ids = names(3);
  const auto c = cmc({list_of(ids)}, {{ids[1]}});
  std::ostringstream out;
  write_cmc_csv(out, c);
  EXPECT_EQ(out.str().rfind("rank,rate\n", 0), 0u);
  EXPECT_NE(out.str().find("2,1"), std::string::npos);
}
