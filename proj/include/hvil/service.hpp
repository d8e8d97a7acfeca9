#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "hvil/benchmark.hpp"
#include "hvil/core.hpp"
#include "hvil/hvil.hpp"
#include "hvil/json_io.hpp"
#include "hvil/rmel.hpp"

namespace hvil {

struct SessionConfig {
  HvilConfig hvil;
  std::uint64_t seed = 0;
  bool shuffle = false;                 // permute the probe order with `seed`
  bool snapshot_per_feedback = false;   // weak model after every update instead of per probe
};

void to_json(Json& j, const SessionConfig& c);
void from_json(const Json& j, SessionConfig& c);

struct RankingEntryView {
  std::string item_id;
  std::size_t position = 0;
  double score = 0.0;
  std::string camera;
  std::optional<std::string> image_ref;
  std::string glyph;  // deterministic colour derived from the feature bytes
};

struct RankingView {
  std::string session_id;
  std::string probe_id;
  std::uint64_t token = 0;
  int round = 0;
  int budget = 0;
  bool closed = false;
  std::size_t window_k = 0;
  std::size_t gallery_size = 0;
  std::vector<RankingEntryView> entries;
};

struct ProbeView {
  std::string session_id;
  bool complete = false;
  std::string probe_id;
  std::size_t index = 0;
  std::size_t total = 0;
  int round = 0;
  int budget = 0;
  bool closed = false;
  std::uint64_t token = 0;
  std::optional<std::string> image_ref;
  std::string glyph;
};

struct FeedbackRequest {
  std::string probe_id;
  std::string gallery_item_id;
  FeedbackLabel label = FeedbackLabel::kStrongNegative;
  std::optional<std::uint64_t> token;
};

struct FeedbackResponse {
  RankingView ranking;
  FeedbackEvent event;
  bool applied = false;
  double loss = 0.0;
  double latency_ms = 0.0;
};

struct EnsembleInfo {
  std::string ensemble_id;
  std::size_t tau = 0;
  std::size_t pairs = 0;
  RmelTrace trace;
};

Json to_json_value(const RankingView& v);
Json to_json_value(const ProbeView& v);
Json to_json_value(const FeedbackResponse& v);
Json to_json_value(const EnsembleInfo& v);

std::string feature_glyph(const Vector& feature);

/// Orchestrates HIL sessions over registered datasets. Thread-safe: each
/// session has a single serialized writer; rankings are computed against
/// immutable model snapshots. With a storage directory every state change is
/// persisted and `restore` rebuilds sessions after a restart.
class SessionService {
 public:
  explicit SessionService(std::filesystem::path storage = {});
  ~SessionService();

  SessionService(const SessionService&) = delete;
  SessionService& operator=(const SessionService&) = delete;

  void register_dataset(const std::string& dataset_id, Dataset dataset);
  /// Loads a dataset directory; the path is recorded so `restore` can reload it.
  void register_dataset_dir(const std::string& dataset_id, const std::filesystem::path& dir, bool normalize = true);
  std::vector<std::string> dataset_ids() const;

  std::string create_session(const std::string& dataset_id, const SessionConfig& config);
  ProbeView current_probe(const std::string& session_id) const;
  RankingView get_ranking(const std::string& session_id, const std::optional<std::string>& probe_id,
                          std::size_t top_k) const;
  FeedbackResponse submit_feedback(const std::string& session_id, const FeedbackRequest& request);
  ProbeView advance_probe(const std::string& session_id);
  EnsembleInfo train_ensemble(const std::string& session_id, const RmelConfig& config);
  std::string run_simulated_benchmark(const std::string& dataset_id, const BenchmarkConfig& config,
                                      const std::vector<std::uint64_t>& seeds);

  /// A benchmark report, or the live counters of a session.
  Json report(const std::string& id) const;

  std::size_t weak_model_count(const std::string& session_id) const;
  MetricModel current_model(const std::string& session_id) const;
  std::optional<std::filesystem::path> image_path(const std::string& dataset_id, const std::string& item_id) const;

  /// Reloads datasets and sessions persisted under the storage directory.
  void restore();

 private:
  struct Session;
  struct DatasetEntry {
    std::shared_ptr<const Dataset> data;
    std::optional<std::filesystem::path> dir;
    bool normalize = true;
  };

  std::shared_ptr<Session> find_session(const std::string& id) const;
  std::shared_ptr<const Dataset> find_dataset(const std::string& id) const;
  void persist_registry() const;
  void persist_session(const Session& s) const;
  void close_probe(Session& s);

  std::filesystem::path storage_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, DatasetEntry> datasets_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::map<std::string, Json> reports_;
  std::atomic<std::uint64_t> next_id_{1};
};

}  // namespace hvil
