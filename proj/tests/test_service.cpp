#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <thread>

#include "hvil/error.hpp"
#include "hvil/service.hpp"
#include "hvil/synthetic.hpp"
#include "test_util.hpp"

using namespace hvil;

namespace {

SyntheticSpec small_spec(std::uint64_t seed = 1, int n = 60, int d = 16) {
  SyntheticSpec spec;
  spec.n_identities = n;
  spec.dim = d;
  spec.nuisance_rank = 4;
  spec.seed = seed;
  return spec;
}

SessionConfig small_config(std::size_t window = 10) {
  SessionConfig c;
  c.hvil.window_k = window;
  return c;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::kInvalidArgument;
}

std::string match_id(const Dataset& ds, const std::string& probe_id) {
  return ds.gallery[ds.true_matches(ds.probes.at(probe_id)).front()].item_id;
}

// Feedback that closes the current probe: the true match if shown, else strong
// negatives on the last window entry until the budget runs out.
void finish_probe(SessionService& svc, const std::string& sid, const Dataset& ds) {
  for (;;) {
    const auto probe = svc.current_probe(sid);
    if (probe.complete || probe.closed) return;
    const auto view = svc.get_ranking(sid, std::nullopt, 1000000);
    const auto truth = match_id(ds, probe.probe_id);
    const auto it = std::find_if(view.entries.begin(), view.entries.begin() + static_cast<long>(view.window_k),
                                 [&](const RankingEntryView& e) { return e.item_id == truth; });
    if (it != view.entries.begin() + static_cast<long>(view.window_k)) {
      svc.submit_feedback(sid, {probe.probe_id, truth, FeedbackLabel::kTrueMatch, view.token});
    } else {
      svc.submit_feedback(sid, {probe.probe_id, view.entries[view.window_k - 1].item_id,
                                 FeedbackLabel::kStrongNegative, view.token});
    }
  }
}

}  // namespace

class ServiceTest : public ::testing::Test {
 protected:
  void SetUp() override {
    data = gen_synthetic(small_spec()).to_dataset();
    svc.register_dataset("ds", data);
  }
  Dataset data;
  SessionService svc;
};

TEST_F(ServiceTest, CreateSessionsWithDistinctIds) {
  const auto a = svc.create_session("ds", small_config());
  const auto b = svc.create_session("ds", small_config());
  EXPECT_NE(a, b);
  EXPECT_EQ(code_of([&] { svc.create_session("nope", small_config()); }), ErrorCode::kNotFound);
  EXPECT_EQ(code_of([&] { svc.current_probe("nope"); }), ErrorCode::kNotFound);
  EXPECT_EQ(svc.dataset_ids(), std::vector<std::string>{"ds"});
}

TEST_F(ServiceTest, FreshSessionRanksByEuclideanDistance) {
  const auto sid = svc.create_session("ds", small_config());
  const auto probe = svc.current_probe(sid);
  EXPECT_EQ(probe.probe_id, data.probes[0].item_id);
  EXPECT_EQ(probe.total, data.probes.size());
  const auto view = svc.get_ranking(sid, std::nullopt, 1000);
  ASSERT_EQ(view.entries.size(), data.gallery.size());
  EXPECT_EQ(view.gallery_size, data.gallery.size());
  const auto expected = rank_gallery(data.probes[0].feature, data.gallery, MetricModel::identity(data.dim()));
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_EQ(view.entries[i].item_id, expected[i].item_id);
    EXPECT_EQ(view.entries[i].position, i);
  }
  EXPECT_EQ(svc.get_ranking(sid, std::nullopt, 5).entries.size(), 5u);
  // Identity labels never leak into the ranking payload.
  const Json j = to_json_value(view);
  EXPECT_EQ(j.dump().find(data.probes[0].person.value), std::string::npos);
  EXPECT_EQ(view.entries[0].glyph, feature_glyph(data.gallery.at(view.entries[0].item_id).feature));
  EXPECT_EQ(code_of([&] { svc.get_ranking(sid, "other", 5); }), ErrorCode::kNotFound);
  // Other probes can be inspected but not annotated.
  const auto other = svc.get_ranking(sid, data.probes[1].item_id, 5);
  EXPECT_TRUE(other.closed);
  EXPECT_FALSE(view.closed);
}

TEST_F(ServiceTest, StrongNegativeMovesItemDown) {
  const auto sid = svc.create_session("ds", small_config());
  const auto probe = svc.current_probe(sid);
  const auto before = svc.get_ranking(sid, std::nullopt, 1000);
  const auto target = before.entries[3].item_id;
  const auto r = svc.submit_feedback(sid, {probe.probe_id, target, FeedbackLabel::kStrongNegative, before.token});
  EXPECT_EQ(r.ranking.round, 1);
  EXPECT_NE(r.ranking.token, before.token);
  const auto after = svc.get_ranking(sid, std::nullopt, 1000);
  const auto pos = std::find_if(after.entries.begin(), after.entries.end(),
                                [&](const RankingEntryView& e) { return e.item_id == target; }) -
                   after.entries.begin();
  EXPECT_GE(pos, 3);
  EXPECT_EQ(r.ranking.entries.size(), 10u);
}

TEST_F(ServiceTest, RejectsInvalidFeedback) {
  const auto sid = svc.create_session("ds", small_config());
  const auto probe = svc.current_probe(sid);
  const auto view = svc.get_ranking(sid, std::nullopt, 1000);
  const auto pid = probe.probe_id;
  EXPECT_EQ(code_of([&] { svc.submit_feedback(sid, {pid, view.entries[20].item_id, FeedbackLabel::kStrongNegative, {}}); }),
            ErrorCode::kOutOfWindow);
  EXPECT_EQ(code_of([&] { svc.submit_feedback(sid, {pid, "missing", FeedbackLabel::kStrongNegative, {}}); }),
            ErrorCode::kNotFound);
  EXPECT_EQ(code_of([&] { svc.submit_feedback(sid, {"p9999", view.entries[0].item_id, FeedbackLabel::kStrongNegative, {}}); }),
            ErrorCode::kStaleToken);
  svc.submit_feedback(sid, {pid, view.entries[0].item_id, FeedbackLabel::kStrongNegative, view.token});
  EXPECT_EQ(code_of([&] {
              svc.submit_feedback(sid, {pid, view.entries[0].item_id, FeedbackLabel::kStrongNegative, view.token});
            }),
            ErrorCode::kStaleToken);
  // Rejected requests leave the session untouched.
  EXPECT_EQ(svc.current_probe(sid).round, 1);
}

TEST_F(ServiceTest, BudgetExhaustionClosesProbe) {
  const auto sid = svc.create_session("ds", small_config());
  const auto pid = svc.current_probe(sid).probe_id;
  const auto truth = match_id(data, pid);
  for (int i = 0; i < 3; ++i) {
    const auto view = svc.get_ranking(sid, std::nullopt, 10);
    const auto& pick = view.entries[0].item_id == truth ? view.entries[1] : view.entries[0];
    svc.submit_feedback(sid, {pid, pick.item_id, FeedbackLabel::kStrongNegative, view.token});
  }
  const auto probe = svc.current_probe(sid);
  EXPECT_TRUE(probe.closed);
  EXPECT_EQ(svc.weak_model_count(sid), 1u);
  const auto view = svc.get_ranking(sid, std::nullopt, 10);
  EXPECT_EQ(code_of([&] { svc.submit_feedback(sid, {pid, view.entries[0].item_id, FeedbackLabel::kStrongNegative, {}}); }),
            ErrorCode::kBudgetExhausted);
}

TEST_F(ServiceTest, TrueMatchClosesProbeAndRecordsPair) {
  SessionConfig cfg = small_config(60);
  const auto sid = svc.create_session("ds", cfg);
  const auto pid = svc.current_probe(sid).probe_id;
  const auto r = svc.submit_feedback(sid, {pid, match_id(data, pid), FeedbackLabel::kTrueMatch, {}});
  EXPECT_TRUE(r.ranking.closed);
  EXPECT_EQ(r.ranking.entries[0].item_id, match_id(data, pid));
  EXPECT_EQ(svc.weak_model_count(sid), 1u);
  EXPECT_EQ(svc.report(sid)["verified_pairs"], 1);
  EXPECT_EQ(code_of([&] { svc.submit_feedback(sid, {pid, match_id(data, pid), FeedbackLabel::kTrueMatch, {}}); }),
            ErrorCode::kProbeClosed);
}

TEST_F(ServiceTest, AdvanceToCompletion) {
  const auto sid = svc.create_session("ds", small_config());
  ProbeView p = svc.current_probe(sid);
  std::size_t seen = 0;
  while (!p.complete) {
    ++seen;
    p = svc.advance_probe(sid);
  }
  EXPECT_EQ(seen, data.probes.size());
  EXPECT_EQ(svc.weak_model_count(sid), data.probes.size());
  EXPECT_EQ(code_of([&] { svc.submit_feedback(sid, {"x", "y", FeedbackLabel::kTrueMatch, {}}); }),
            ErrorCode::kProbeClosed);
  EXPECT_TRUE(svc.advance_probe(sid).complete);
  EXPECT_TRUE(svc.report(sid)["complete"].get<bool>());
}

TEST_F(ServiceTest, EnsembleTraining) {
  const auto sid = svc.create_session("ds", small_config(60));
  EXPECT_EQ(code_of([&] { svc.train_ensemble(sid, RmelConfig{}); }), ErrorCode::kDegenerateInput);
  for (int i = 0; i < 6; ++i) {
    finish_probe(svc, sid, data);
    svc.advance_probe(sid);
  }
  const auto info = svc.train_ensemble(sid, RmelConfig{});
  EXPECT_EQ(info.tau, 6u);
  EXPECT_GE(info.pairs, 2u);
  EXPECT_GE(info.trace.min_eigenvalue, -1e-10);
  EXPECT_LE(info.trace.objective_final, info.trace.objective_init);
  EXPECT_EQ(svc.report(info.ensemble_id)["tau"], 6);

  // Same feedback, same ensemble.
  const auto sid2 = svc.create_session("ds", small_config(60));
  for (int i = 0; i < 6; ++i) {
    finish_probe(svc, sid2, data);
    svc.advance_probe(sid2);
  }
  const auto info2 = svc.train_ensemble(sid2, RmelConfig{});
  EXPECT_EQ(info.trace.objective_final, info2.trace.objective_final);
}

TEST(ServicePersistence, RestoreReproducesRankings) {
  hvil::testing::TempDir data_dir, store;
  const auto synthetic = gen_synthetic(small_spec(5));
  synthetic.write(data_dir.path());
  const Dataset ds = synthetic.to_dataset();
  std::string sid;
  RankingView before;
  std::size_t weak = 0;
  {
    SessionService svc(store.path());
    svc.register_dataset_dir("ds", data_dir.path());
    sid = svc.create_session("ds", small_config());
    for (int i = 0; i < 3; ++i) {
      finish_probe(svc, sid, ds);
      svc.advance_probe(sid);
    }
    const auto view = svc.get_ranking(sid, std::nullopt, 10);
    svc.submit_feedback(sid, {view.probe_id, view.entries[9].item_id, FeedbackLabel::kStrongNegative, view.token});
    before = svc.get_ranking(sid, std::nullopt, 1000);
    weak = svc.weak_model_count(sid);
  }
  SessionService again(store.path());
  again.restore();
  const auto after = again.get_ranking(sid, std::nullopt, 1000);
  EXPECT_EQ(after.probe_id, before.probe_id);
  EXPECT_EQ(after.round, before.round);
  EXPECT_EQ(after.token, before.token);
  ASSERT_EQ(after.entries.size(), before.entries.size());
  for (std::size_t i = 0; i < after.entries.size(); ++i) {
    EXPECT_EQ(after.entries[i].item_id, before.entries[i].item_id);
    EXPECT_EQ(after.entries[i].score, before.entries[i].score);
  }
  EXPECT_EQ(again.weak_model_count(sid), weak);
  // Work continues after the restart.
  again.submit_feedback(sid, {after.probe_id, after.entries[0].item_id, FeedbackLabel::kStrongNegative, after.token});
}

TEST(ServiceConcurrency, ReadersSeeConsistentSnapshots) {
  SessionService svc;
  const Dataset ds = gen_synthetic(small_spec(7, 200, 32)).to_dataset();
  svc.register_dataset("ds", ds);
  const auto sid = svc.create_session("ds", small_config(20));
  const auto other = svc.create_session("ds", small_config(20));
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 4; ++t) {
    readers.emplace_back([&, t] {
      while (!done) {
        try {
          const auto v = svc.get_ranking(t % 2 ? sid : other, std::nullopt, 50);
          for (std::size_t i = 1; i < v.entries.size(); ++i) {
            if (v.entries[i - 1].score < v.entries[i].score) ++bad;
          }
        } catch (const Error&) {
          ++bad;
        }
      }
    });
  }
  std::thread writer2([&] {
    for (int i = 0; i < 10; ++i) {
      finish_probe(svc, other, ds);
      svc.advance_probe(other);
    }
  });
  for (int i = 0; i < 10; ++i) {
    finish_probe(svc, sid, ds);
    svc.advance_probe(sid);
  }
  writer2.join();
  done = true;
  for (auto& r : readers) r.join();
  EXPECT_EQ(bad.load(), 0);
  EXPECT_EQ(svc.weak_model_count(sid), 10u);
  EXPECT_EQ(svc.weak_model_count(other), 10u);
}

TEST(ServiceLatency, FeedbackRoundTripUnderBudget) {
  SessionService svc;
  SyntheticSpec spec = small_spec(9, 1000, 128);
  spec.nuisance_rank = 8;
  const Dataset ds = gen_synthetic(spec).to_dataset();
  svc.register_dataset("ds", ds);
  SessionConfig cfg;
  const auto sid = svc.create_session("ds", cfg);
  std::vector<double> ms;
  for (int i = 0; i < 40; ++i) {
    const auto view = svc.get_ranking(sid, std::nullopt, 50);
    if (view.closed) {
      svc.advance_probe(sid);
      continue;
    }
    const auto t0 = std::chrono::steady_clock::now();
    svc.submit_feedback(sid, {view.probe_id, view.entries[45].item_id, FeedbackLabel::kStrongNegative, view.token});
    ms.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
  }
  std::sort(ms.begin(), ms.end());
  const double p95 = ms[static_cast<std::size_t>(0.95 * static_cast<double>(ms.size() - 1))];
  RecordProperty("p95_ms", std::to_string(p95));
  EXPECT_LT(p95, 300.0);
}
