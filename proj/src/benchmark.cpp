#include "hvil/benchmark.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <numeric>
#include <random>

#include "hvil/error.hpp"
#include "hvil/eval.hpp"

namespace hvil {

namespace {

using SourceFor = std::function<FeedbackSource&(const Item& probe)>;

double mean_of(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  if (end <= begin) return 0.0;
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end),
                         0.0) /
         static_cast<double>(end - begin);
}

// Mean 1-based position of the probe's true matches.
double mean_match_position(const RankedList& list, const MatchSet& truth) {
  const auto positions = match_positions(list, truth);
  if (positions.empty()) return 0.0;
  double sum = 0.0;
  for (auto p : positions) sum += static_cast<double>(p + 1);
  return sum / static_cast<double>(positions.size());
}

BenchmarkRun run_pipeline(const Dataset& dataset, const BenchmarkConfig& config, std::uint64_t seed,
                          const SourceFor& source_for) {
  config.validate();
  const auto order = probe_order(dataset.probes.size(), config.shuffle, seed);
  if (order.size() < config.hil_probes + config.hol_probes) {
    throw Error(ErrorCode::kInvalidArgument, "dataset has " + std::to_string(order.size()) +
                                                 " probes, fewer than hil_probes + hol_probes");
  }
  const Gallery& gallery = dataset.gallery;
  const MetricModel l2 = MetricModel::identity(dataset.dim());

  BenchmarkRun run;
  std::vector<RankedList> l2_lists, final_lists;
  std::vector<MatchSet> hil_truth;
  std::vector<double> pre_positions;
  Json hil_probe_ids = Json::array();
  MetricModel model = l2;
  for (std::size_t t = 0; t < config.hil_probes; ++t) {
    const Item& probe = dataset.probes[order[t]];
    MatchSet truth;
    for (auto i : dataset.true_matches(probe)) truth.insert(gallery[i].item_id);
    auto session = run_probe_session(model, probe, gallery, source_for(probe), config.hvil);
    model = session.model;
    pre_positions.push_back(mean_match_position(session.initial_ranking, truth));
    l2_lists.push_back(rank_gallery(probe.feature, gallery, l2));
    final_lists.push_back(std::move(session.final_ranking));
    for (const auto& e : session.log.events) {
      if (e.label == FeedbackLabel::kTrueMatch) {
        run.verified.push_back({probe.feature, gallery.at(e.gallery_item_id).feature, probe.person});
      }
    }
    hil_truth.push_back(std::move(truth));
    run.logs.push_back(std::move(session.log));
    run.weak_models.push_back(model);
    hil_probe_ids.push_back(probe.item_id);
  }

  const std::size_t quartile = config.hil_probes / 4;
  Json hil{{"probes", hil_probe_ids},
           {"l2", summary_json(summarize(l2_lists, hil_truth))},
           {"hvil", summary_json(summarize(final_lists, hil_truth))},
           {"pre_feedback",
            {{"positions", pre_positions},
             {"er_first_quartile", mean_of(pre_positions, 0, quartile)},
             {"er_last_quartile", mean_of(pre_positions, config.hil_probes - quartile, config.hil_probes)}}},
           {"effort", effort_json(effort_stats(run.logs))},
           {"exhaustive_search_browsed", exhaustive_search_browsed(l2_lists, hil_truth)}};

  std::vector<const Item*> hol_probes;
  std::vector<MatchSet> hol_truth;
  for (std::size_t t = config.hil_probes; t < config.hil_probes + config.hol_probes; ++t) {
    const Item& probe = dataset.probes[order[t]];
    hol_probes.push_back(&probe);
    MatchSet truth;
    for (auto i : dataset.true_matches(probe)) truth.insert(gallery[i].item_id);
    hol_truth.push_back(std::move(truth));
  }
  const auto rank_all = [&](const MetricModel& m) {
    std::vector<RankedList> lists;
    for (const Item* p : hol_probes) lists.push_back(rank_gallery(p->feature, gallery, m));
    return summary_json(summarize(lists, hol_truth));
  };

  Json hol{{"probes", hol_probes.size()}, {"l2", rank_all(l2)}};
  if (!run.weak_models.empty()) {
    hol["m_tau"] = rank_all(run.weak_models.back());
    hol["m_avg"] = rank_all(average_ensemble(run.weak_models));
    try {
      auto trained = train_rmel(run.verified, run.weak_models, config.rmel);
      std::vector<RankedList> lists;
      for (const Item* p : hol_probes) lists.push_back(hol_rank(p->feature, gallery, trained.model));
      hol["rmel"] = summary_json(summarize(lists, hol_truth));
      hol["rmel_training"] = Json{{"objective_init", trained.trace.objective_init},
                                  {"objective_final", trained.trace.objective_final},
                                  {"iterations", trained.trace.iterations},
                                  {"lipschitz", trained.trace.lipschitz},
                                  {"min_eigenvalue", trained.trace.min_eigenvalue},
                                  {"pairs", trained.trace.pairs}};
      run.ensemble = std::move(trained.model);
    } catch (const Error& e) {
      hol["rmel"] = nullptr;
      hol["rmel_error"] = Json{{"code", to_string(e.code())}, {"message", e.what()}};
    }
  }

  run.report = Json{{"seed", seed},
                    {"config", config},
                    {"dataset", {{"probes", dataset.probes.size()}, {"gallery", gallery.size()}, {"dim", dataset.dim()}}},
                    {"weak_models", run.weak_models.size()},
                    {"verified_pairs", run.verified.size()},
                    {"hil", std::move(hil)},
                    {"hol", std::move(hol)}};
  return run;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void BenchmarkConfig::validate() const {
  hvil.validate();
  policy.validate();
  rmel.validate();
  if (hil_probes < 1) throw Error(ErrorCode::kInvalidArgument, "hil_probes must be >= 1");
  if (policy.window_k != hvil.window_k || policy.max_rounds != hvil.max_rounds_per_probe) {
    throw Error(ErrorCode::kInvalidArgument, "oracle window/rounds must match the HVIL config");
  }
}

void to_json(Json& j, const BenchmarkConfig& c) {
  j = Json{{"hvil", c.hvil},           {"oracle", c.policy},         {"rmel", c.rmel},
           {"hil_probes", c.hil_probes}, {"hol_probes", c.hol_probes}, {"shuffle", c.shuffle}};
}

void from_json(const Json& j, BenchmarkConfig& c) {
  if (j.contains("hvil")) j.at("hvil").get_to(c.hvil);
  if (j.contains("oracle")) j.at("oracle").get_to(c.policy);
  if (j.contains("rmel")) j.at("rmel").get_to(c.rmel);
  c.hil_probes = j.value("hil_probes", c.hil_probes);
  c.hol_probes = j.value("hol_probes", c.hol_probes);
  c.shuffle = j.value("shuffle", c.shuffle);
}

std::vector<std::size_t> probe_order(std::size_t n_probes, bool shuffle, std::uint64_t seed) {
  std::vector<std::size_t> order(n_probes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) {
    // Fisher-Yates with an explicit draw so the order is library-independent.
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
    for (std::size_t i = n_probes; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  }
  return order;
}

BenchmarkRun run_benchmark(const Dataset& dataset, const BenchmarkConfig& config, std::uint64_t seed) {
  SimulatedOracle oracle(dataset, config.policy, seed);
  return run_pipeline(dataset, config, seed, [&](const Item&) -> FeedbackSource& { return oracle; });
}

BenchmarkRun replay_benchmark(const Dataset& dataset, const BenchmarkConfig& config, std::uint64_t seed,
                              const std::vector<ProbeLog>& logs) {
  std::map<std::string, const ProbeLog*> by_probe;
  for (const auto& log : logs) by_probe[log.probe_id] = &log;
  std::vector<ProbeLog> empty_logs;
  empty_logs.reserve(dataset.probes.size());
  std::optional<ReplaySource> source;
  return run_pipeline(dataset, config, seed, [&](const Item& probe) -> FeedbackSource& {
    auto it = by_probe.find(probe.item_id);
    if (it != by_probe.end()) {
      source.emplace(*it->second);
    } else {
      empty_logs.push_back(ProbeLog{probe.item_id, 0.0, 0, {}});
      source.emplace(empty_logs.back());
    }
    return *source;
  });
}

Json aggregate_reports(const std::vector<Json>& reports) {
  const auto collect = [&](const Json::json_pointer& ptr) {
    std::vector<double> v;
    for (const auto& r : reports) {
      if (r.contains(ptr) && r.at(ptr).is_number()) v.push_back(r.at(ptr).get<double>());
    }
    return v;
  };
  Json out{{"seeds", reports.size()}};
  const std::vector<std::string> keys = {
      "/hil/l2/rank1",          "/hil/l2/expected_rank", "/hil/hvil/rank1",        "/hil/hvil/expected_rank",
      "/hil/hvil/map",          "/hol/l2/rank1",         "/hol/m_tau/rank1",       "/hol/m_avg/rank1",
      "/hol/rmel/rank1",        "/hol/rmel/map",         "/hil/effort/found_matches_pct",
      "/hil/effort/mean_browsed_images", "/hil/effort/mean_feedback_count",
      "/hil/pre_feedback/er_first_quartile", "/hil/pre_feedback/er_last_quartile"};
  Json medians;
  for (const auto& key : keys) medians[key] = median(collect(Json::json_pointer(key)));
  out["median"] = std::move(medians);
  std::size_t cumulative = 0;
  for (const auto& r : reports) {
    const auto& pre = r.at("hil").at("pre_feedback");
    if (pre.at("er_last_quartile").get<double>() < pre.at("er_first_quartile").get<double>()) ++cumulative;
  }
  out["cumulative_learning_seeds"] = cumulative;
  return out;
}

}  // namespace hvil
