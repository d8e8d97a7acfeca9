#include "hvil/service.hpp"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <future>
#include <numeric>
#include <sstream>

#include "hvil/dataset_io.hpp"
#include "hvil/error.hpp"
#include "hvil/eval.hpp"

namespace fs = std::filesystem;

namespace hvil {

struct SessionService::Session {
  mutable std::mutex mutex;
  std::string id;
  std::string dataset_id;
  std::shared_ptr<const Dataset> data;
  SessionConfig config;
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  std::shared_ptr<const MetricModel> model;
  std::uint64_t token = 1;
  int round = 0;
  bool closed = false;
  ProbeLog current_log;
  std::vector<ProbeLog> completed_logs;
  std::vector<MetricModel> weak;
  std::vector<std::pair<std::string, std::string>> verified;  // (probe id, gallery item id)
  std::vector<double> pre_positions;   // mean 1-based match position when presented
  std::vector<double> final_best;      // best match position at close
  std::vector<double> final_mean;      // mean match position at close
  std::size_t ensembles = 0;

  bool complete() const { return cursor >= order.size(); }
  const Item& probe() const { return data->probes[order[cursor]]; }
  std::size_t window() const { return config.hvil.effective_window(data->gallery.size()); }
};

namespace {

double wall_clock() {
  using namespace std::chrono;
  return duration<double>(system_clock::now().time_since_epoch()).count();
}

std::pair<double, double> match_stats(const Dataset& data, const Item& probe, const MetricModel& model) {
  const auto list = rank_gallery(probe.feature, data.gallery, model);
  MatchSet truth;
  for (auto i : data.true_matches(probe)) truth.insert(data.gallery[i].item_id);
  const auto positions = match_positions(list, truth);
  if (positions.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (auto p : positions) sum += static_cast<double>(p + 1);
  return {static_cast<double>(positions.front() + 1), sum / static_cast<double>(positions.size())};
}

void write_atomic(const fs::path& path, const std::string& content) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIo, "cannot write " + tmp.string());
    out << content;
    if (!out) throw Error(ErrorCode::kIo, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string weak_file(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04zu.hvm", index);
  return buf;
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

}  // namespace

void to_json(Json& j, const SessionConfig& c) {
  j = Json{{"hvil", c.hvil},
           {"seed", c.seed},
           {"shuffle", c.shuffle},
           {"snapshot_per_feedback", c.snapshot_per_feedback}};
}

void from_json(const Json& j, SessionConfig& c) {
  if (j.contains("hvil")) j.at("hvil").get_to(c.hvil);
  c.seed = j.value("seed", c.seed);
  c.shuffle = j.value("shuffle", c.shuffle);
  c.snapshot_per_feedback = j.value("snapshot_per_feedback", c.snapshot_per_feedback);
}

std::string feature_glyph(const Vector& feature) {
  std::uint64_t h = 1469598103934665603ULL;
  for (Eigen::Index i = 0; i < feature.size(); ++i) {
    const double v = feature[i];
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%06llx", static_cast<unsigned long long>(h & 0xffffffULL));
  return buf;
}

Json to_json_value(const RankingView& v) {
  Json entries = Json::array();
  for (const auto& e : v.entries) {
    entries.push_back(Json{{"item_id", e.item_id},
                           {"position", e.position},
                           {"score", e.score},
                           {"camera", e.camera},
                           {"image_ref", e.image_ref ? Json(*e.image_ref) : Json(nullptr)},
                           {"glyph", e.glyph}});
  }
  return Json{{"session_id", v.session_id}, {"probe_id", v.probe_id},       {"token", v.token},
              {"round", v.round},           {"budget", v.budget},           {"closed", v.closed},
              {"window_k", v.window_k},     {"gallery_size", v.gallery_size}, {"entries", std::move(entries)}};
}

Json to_json_value(const ProbeView& v) {
  Json j{{"session_id", v.session_id}, {"complete", v.complete}, {"index", v.index}, {"total", v.total}};
  if (!v.complete) {
    j["probe_id"] = v.probe_id;
    j["round"] = v.round;
    j["budget"] = v.budget;
    j["closed"] = v.closed;
    j["token"] = v.token;
    j["image_ref"] = v.image_ref ? Json(*v.image_ref) : Json(nullptr);
    j["glyph"] = v.glyph;
  }
  return j;
}

Json to_json_value(const FeedbackResponse& v) {
  return Json{{"ranking", to_json_value(v.ranking)},
              {"event", v.event},
              {"applied", v.applied},
              {"loss", v.loss},
              {"latency_ms", v.latency_ms}};
}

Json to_json_value(const EnsembleInfo& v) {
  return Json{{"ensemble_id", v.ensemble_id},
              {"tau", v.tau},
              {"pairs", v.pairs},
              {"objective_init", v.trace.objective_init},
              {"objective_final", v.trace.objective_final},
              {"iterations", v.trace.iterations},
              {"min_eigenvalue", v.trace.min_eigenvalue}};
}

SessionService::SessionService(fs::path storage) : storage_(std::move(storage)) {
  if (!storage_.empty()) {
    fs::create_directories(storage_ / "sessions");
    fs::create_directories(storage_ / "reports");
    fs::create_directories(storage_ / "ensembles");
  }
}

SessionService::~SessionService() = default;

void SessionService::register_dataset(const std::string& dataset_id, Dataset dataset) {
  if (dataset_id.empty()) throw Error(ErrorCode::kInvalidArgument, "dataset id must not be empty");
  std::unique_lock lock(mutex_);
  datasets_[dataset_id] = DatasetEntry{std::make_shared<const Dataset>(std::move(dataset)), std::nullopt, true};
}

void SessionService::register_dataset_dir(const std::string& dataset_id, const fs::path& dir, bool normalize) {
  if (dataset_id.empty()) throw Error(ErrorCode::kInvalidArgument, "dataset id must not be empty");
  auto data = std::make_shared<const Dataset>(load_dataset_dir(dir, normalize));
  {
    std::unique_lock lock(mutex_);
    datasets_[dataset_id] = DatasetEntry{std::move(data), fs::absolute(dir), normalize};
  }
  persist_registry();
}

std::vector<std::string> SessionService::dataset_ids() const {
  std::shared_lock lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, _] : datasets_) out.push_back(id);
  return out;
}

std::shared_ptr<SessionService::Session> SessionService::find_session(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::kNotFound, "unknown session '" + id + "'");
  return it->second;
}

std::shared_ptr<const Dataset> SessionService::find_dataset(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = datasets_.find(id);
  if (it == datasets_.end()) throw Error(ErrorCode::kNotFound, "unknown dataset '" + id + "'");
  return it->second.data;
}

void SessionService::persist_registry() const {
  if (storage_.empty()) return;
  Json j = Json::object();
  {
    std::shared_lock lock(mutex_);
    for (const auto& [id, entry] : datasets_) {
      if (entry.dir) j[id] = Json{{"dir", entry.dir->string()}, {"normalize", entry.normalize}};
    }
  }
  write_atomic(storage_ / "datasets.json", j.dump(2));
}

void SessionService::persist_session(const Session& s) const {
  if (storage_.empty()) return;
  const fs::path dir = storage_ / "sessions" / s.id;
  fs::create_directories(dir / "weak");
  Json completed = Json::array();
  for (const auto& log : s.completed_logs) {
    completed.push_back(Json{{"probe_id", log.probe_id}, {"presented_at", log.presented_at}, {"window_k", log.window_k}});
  }
  Json verified = Json::array();
  for (const auto& [p, g] : s.verified) verified.push_back(Json::array({p, g}));
  const Json j{{"id", s.id},
               {"dataset_id", s.dataset_id},
               {"config", s.config},
               {"order", s.order},
               {"cursor", s.cursor},
               {"token", s.token},
               {"round", s.round},
               {"closed", s.closed},
               {"presented_at", s.current_log.presented_at},
               {"completed", std::move(completed)},
               {"verified", std::move(verified)},
               {"weak_models", s.weak.size()},
               {"pre_positions", s.pre_positions},
               {"final_best", s.final_best},
               {"final_mean", s.final_mean},
               {"ensembles", s.ensembles}};
  std::ostringstream model_bytes;
  s.model->write(model_bytes);
  write_atomic(dir / "model.hvm", model_bytes.str());
  write_atomic(dir / "session.json", j.dump(2));
}

std::string SessionService::create_session(const std::string& dataset_id, const SessionConfig& config) {
  config.hvil.validate();
  auto data = find_dataset(dataset_id);
  if (data->gallery.size() < 2) throw Error(ErrorCode::kInvalidArgument, "dataset gallery needs at least 2 items");
  if (config.hvil.window_k > data->gallery.size()) {
    throw Error(ErrorCode::kInvalidArgument, "window_k exceeds the gallery size");
  }
  auto s = std::make_shared<Session>();
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%04llu", static_cast<unsigned long long>(next_id_++));
  s->id = buf;
  s->dataset_id = dataset_id;
  s->data = data;
  s->config = config;
  s->order = probe_order(data->probes.size(), config.shuffle, config.seed);
  s->model = std::make_shared<const MetricModel>(MetricModel::identity(data->dim()));
  if (!s->complete()) {
    s->current_log = ProbeLog{s->probe().item_id, wall_clock(), s->window(), {}};
    s->pre_positions.push_back(match_stats(*data, s->probe(), *s->model).second);
  }
  {
    std::unique_lock lock(mutex_);
    sessions_[s->id] = s;
  }
  if (!storage_.empty()) {
    std::scoped_lock lock(s->mutex);
    fs::create_directories(storage_ / "sessions" / s->id / "weak");
    std::ofstream(storage_ / "sessions" / s->id / "events.jsonl", std::ios::trunc);
    persist_session(*s);
  }
  return s->id;
}

ProbeView SessionService::current_probe(const std::string& session_id) const {
  auto s = find_session(session_id);
  std::scoped_lock lock(s->mutex);
  ProbeView v;
  v.session_id = s->id;
  v.total = s->order.size();
  v.index = s->cursor;
  v.complete = s->complete();
  if (v.complete) return v;
  const Item& p = s->probe();
  v.probe_id = p.item_id;
  v.round = s->round;
  v.budget = s->config.hvil.max_rounds_per_probe;
  v.closed = s->closed;
  v.token = s->token;
  v.image_ref = p.image_ref;
  v.glyph = feature_glyph(p.feature);
  return v;
}

namespace {

RankingView make_view(const std::string& session_id, const Dataset& data, const Item& probe,
                      const MetricModel& model, std::size_t top_k) {
  RankingView v;
  v.session_id = session_id;
  v.probe_id = probe.item_id;
  v.gallery_size = data.gallery.size();
  const auto list = rank_gallery(probe.feature, data.gallery, model);
  for (std::size_t pos = 0; pos < list.size() && pos < top_k; ++pos) {
    const Item& g = data.gallery[list[pos].index];
    v.entries.push_back({g.item_id, pos, list[pos].score, g.camera, g.image_ref, feature_glyph(g.feature)});
  }
  return v;
}

}  // namespace

RankingView SessionService::get_ranking(const std::string& session_id, const std::optional<std::string>& probe_id,
                                        std::size_t top_k) const {
  auto s = find_session(session_id);
  std::shared_ptr<const MetricModel> model;
  std::shared_ptr<const Dataset> data;
  const Item* probe = nullptr;
  RankingView header;
  {
    std::scoped_lock lock(s->mutex);
    data = s->data;
    model = s->model;
    header.token = s->token;
    header.round = s->round;
    header.budget = s->config.hvil.max_rounds_per_probe;
    header.window_k = s->window();
    if (probe_id) {
      auto idx = data->probes.find(*probe_id);
      if (!idx) throw Error(ErrorCode::kNotFound, "unknown probe '" + *probe_id + "'");
      probe = &data->probes[*idx];
      header.closed = s->complete() || s->probe().item_id != *probe_id || s->closed;
    } else {
      if (s->complete()) throw Error(ErrorCode::kNotFound, "session '" + session_id + "' has no current probe");
      probe = &s->probe();
      header.closed = s->closed;
    }
  }
  RankingView v = make_view(s->id, *data, *probe, *model, top_k);
  v.token = header.token;
  v.round = header.round;
  v.budget = header.budget;
  v.window_k = header.window_k;
  v.closed = header.closed;
  return v;
}

void SessionService::close_probe(Session& s) {
  s.closed = true;
  const auto [best, mean_pos] = match_stats(*s.data, s.probe(), *s.model);
  s.final_best.push_back(best);
  s.final_mean.push_back(mean_pos);
  s.completed_logs.push_back(s.current_log);
  if (!s.config.snapshot_per_feedback) {
    s.weak.push_back(*s.model);
    if (!storage_.empty()) s.model->save(storage_ / "sessions" / s.id / "weak" / weak_file(s.weak.size() - 1));
  }
}

FeedbackResponse SessionService::submit_feedback(const std::string& session_id, const FeedbackRequest& request) {
  auto s = find_session(session_id);
  std::scoped_lock lock(s->mutex);
  const auto started = std::chrono::steady_clock::now();
  if (s->complete()) throw Error(ErrorCode::kProbeClosed, "session '" + session_id + "' is complete");
  const Item& probe = s->probe();
  if (request.probe_id != probe.item_id) {
    throw Error(ErrorCode::kStaleToken, "probe '" + request.probe_id + "' is not the current probe '" +
                                            probe.item_id + "'");
  }
  if (request.token && *request.token != s->token) {
    throw Error(ErrorCode::kStaleToken, "ranking token " + std::to_string(*request.token) + " is stale (current " +
                                            std::to_string(s->token) + ")");
  }
  if (s->round >= s->config.hvil.max_rounds_per_probe) {
    throw Error(ErrorCode::kBudgetExhausted, "feedback budget of " +
                                                 std::to_string(s->config.hvil.max_rounds_per_probe) +
                                                 " rounds exhausted for probe '" + probe.item_id + "'");
  }
  if (s->closed) throw Error(ErrorCode::kProbeClosed, "probe '" + probe.item_id + "' is closed");

  const Gallery& gallery = s->data->gallery;
  const auto ranking = rank_gallery(probe.feature, gallery, *s->model);
  const auto position = ranking.position_of(request.gallery_item_id);
  if (!position) throw Error(ErrorCode::kNotFound, "unknown gallery item '" + request.gallery_item_id + "'");
  if (*position >= s->window()) {
    throw Error(ErrorCode::kOutOfWindow, "item '" + request.gallery_item_id + "' at position " +
                                             std::to_string(*position) + " is outside the presented window");
  }
  FeedbackEvent event{probe.item_id, request.gallery_item_id, request.label, wall_clock(), *position};
  auto step = hvil_update(*s->model, event, probe, gallery, s->config.hvil);

  s->model = std::make_shared<const MetricModel>(std::move(step.model));
  ++s->token;
  ++s->round;
  s->current_log.events.push_back(event);
  if (!storage_.empty()) {
    Json line = event;
    line["presented_at"] = s->current_log.presented_at;
    line["window_k"] = s->current_log.window_k;
    line["round"] = s->round - 1;
    std::ofstream out(storage_ / "sessions" / s->id / "events.jsonl", std::ios::app);
    out << line.dump() << '\n';
  }
  if (s->config.snapshot_per_feedback) {
    s->weak.push_back(*s->model);
    if (!storage_.empty()) s->model->save(storage_ / "sessions" / s->id / "weak" / weak_file(s->weak.size() - 1));
  }
  if (request.label == FeedbackLabel::kTrueMatch) {
    s->verified.emplace_back(probe.item_id, request.gallery_item_id);
    close_probe(*s);
  } else if (s->round >= s->config.hvil.max_rounds_per_probe) {
    close_probe(*s);
  }
  persist_session(*s);

  FeedbackResponse response;
  response.ranking = make_view(s->id, *s->data, probe, *s->model, s->window());
  response.ranking.token = s->token;
  response.ranking.round = s->round;
  response.ranking.budget = s->config.hvil.max_rounds_per_probe;
  response.ranking.closed = s->closed;
  response.ranking.window_k = s->window();
  response.event = event;
  response.applied = step.context.applied;
  response.loss = step.context.loss;
  response.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
  return response;
}

ProbeView SessionService::advance_probe(const std::string& session_id) {
  auto s = find_session(session_id);
  {
    std::scoped_lock lock(s->mutex);
    if (!s->complete()) {
      if (!s->closed) close_probe(*s);
      ++s->cursor;
      s->round = 0;
      s->closed = false;
      ++s->token;
      if (!s->complete()) {
        s->current_log = ProbeLog{s->probe().item_id, wall_clock(), s->window(), {}};
        s->pre_positions.push_back(match_stats(*s->data, s->probe(), *s->model).second);
      }
      persist_session(*s);
    }
  }
  return current_probe(session_id);
}

EnsembleInfo SessionService::train_ensemble(const std::string& session_id, const RmelConfig& config) {
  auto s = find_session(session_id);
  VerifiedPairSet pairs;
  std::vector<MetricModel> weak;
  std::string ensemble_id;
  {
    std::scoped_lock lock(s->mutex);
    for (const auto& [p, g] : s->verified) {
      const Item& probe = s->data->probes.at(p);
      pairs.push_back({probe.feature, s->data->gallery.at(g).feature, probe.person});
    }
    weak = s->weak;
    ensemble_id = s->id + "-ens" + std::to_string(++s->ensembles);
    persist_session(*s);
  }
  if (weak.empty()) throw Error(ErrorCode::kDegenerateInput, "no weak models: complete at least one probe first");
  if (pairs.empty()) throw Error(ErrorCode::kDegenerateInput, "no verified pairs");
  auto result = train_rmel(pairs, std::move(weak), config);
  if (!storage_.empty()) result.model.save(storage_ / "ensembles" / (ensemble_id + ".rme"));
  EnsembleInfo info{ensemble_id, result.model.tau(), pairs.size(), result.trace};
  std::unique_lock lock(mutex_);
  reports_[ensemble_id] = to_json_value(info);
  return info;
}

std::string SessionService::run_simulated_benchmark(const std::string& dataset_id, const BenchmarkConfig& config,
                                                    const std::vector<std::uint64_t>& seeds) {
  auto data = find_dataset(dataset_id);
  config.validate();
  if (seeds.empty()) throw Error(ErrorCode::kInvalidArgument, "at least one seed is required");
  std::vector<std::future<Json>> jobs;
  for (auto seed : seeds) {
    jobs.push_back(std::async(std::launch::async, [data, config, seed] {
      return run_benchmark(*data, config, seed).report;
    }));
  }
  std::vector<Json> runs;
  for (auto& job : jobs) runs.push_back(job.get());
  Json report{{"dataset_id", dataset_id}, {"seeds", seeds}, {"aggregate", aggregate_reports(runs)}, {"runs", runs}};
  char buf[32];
  std::snprintf(buf, sizeof buf, "bench%04llu", static_cast<unsigned long long>(next_id_++));
  const std::string id = buf;
  report["report_id"] = id;
  if (!storage_.empty()) write_atomic(storage_ / "reports" / (id + ".json"), report.dump(2));
  std::unique_lock lock(mutex_);
  reports_[id] = std::move(report);
  return id;
}

Json SessionService::report(const std::string& id) const {
  {
    std::shared_lock lock(mutex_);
    auto it = reports_.find(id);
    if (it != reports_.end()) return it->second;
    if (!sessions_.contains(id)) throw Error(ErrorCode::kNotFound, "unknown report '" + id + "'");
  }
  auto s = find_session(id);
  std::scoped_lock lock(s->mutex);
  std::size_t top1 = 0;
  for (double b : s->final_best) top1 += b == 1.0 ? 1 : 0;
  return Json{{"session_id", s->id},
              {"dataset_id", s->dataset_id},
              {"probes_total", s->order.size()},
              {"probes_completed", s->completed_logs.size()},
              {"complete", s->complete()},
              {"weak_models", s->weak.size()},
              {"verified_pairs", s->verified.size()},
              {"rank1", s->final_best.empty() ? 0.0
                                              : static_cast<double>(top1) / static_cast<double>(s->final_best.size())},
              {"expected_rank", mean(s->final_mean)},
              {"pre_feedback_expected_rank", mean(s->pre_positions)},
              {"effort", effort_json(effort_stats(s->completed_logs))}};
}

std::size_t SessionService::weak_model_count(const std::string& session_id) const {
  auto s = find_session(session_id);
  std::scoped_lock lock(s->mutex);
  return s->weak.size();
}

MetricModel SessionService::current_model(const std::string& session_id) const {
  auto s = find_session(session_id);
  std::scoped_lock lock(s->mutex);
  return *s->model;
}

std::optional<fs::path> SessionService::image_path(const std::string& dataset_id, const std::string& item_id) const {
  std::shared_lock lock(mutex_);
  auto it = datasets_.find(dataset_id);
  if (it == datasets_.end() || !it->second.dir) return std::nullopt;
  const Dataset& data = *it->second.data;
  const Item* item = nullptr;
  if (auto g = data.gallery.find(item_id)) item = &data.gallery[*g];
  else if (auto p = data.probes.find(item_id)) item = &data.probes[*p];
  if (!item || !item->image_ref) return std::nullopt;
  const fs::path rel(*item->image_ref);
  if (rel.is_absolute()) return std::nullopt;
  for (const auto& part : rel) {
    if (part == "..") return std::nullopt;
  }
  const fs::path full = *it->second.dir / rel;
  if (!fs::is_regular_file(full)) return std::nullopt;
  return full;
}

void SessionService::restore() {
  if (storage_.empty()) return;
  if (fs::exists(storage_ / "datasets.json")) {
    std::ifstream in(storage_ / "datasets.json");
    const Json registry = Json::parse(in);
    for (const auto& [id, entry] : registry.items()) {
      auto data = std::make_shared<const Dataset>(
          load_dataset_dir(entry.at("dir").get<std::string>(), entry.value("normalize", true)));
      std::unique_lock lock(mutex_);
      datasets_[id] = DatasetEntry{std::move(data), fs::path(entry.at("dir").get<std::string>()),
                                   entry.value("normalize", true)};
    }
  }
  std::uint64_t max_id = 0;
  const auto bump = [&](const std::string& name, std::size_t prefix) {
    try {
      max_id = std::max<std::uint64_t>(max_id, std::stoull(name.substr(prefix)));
    } catch (const std::exception&) {
    }
  };
  for (const auto& entry : fs::directory_iterator(storage_ / "reports")) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    const std::string id = entry.path().stem().string();
    std::unique_lock lock(mutex_);
    reports_[id] = Json::parse(in);
    bump(id, 5);
  }
  for (const auto& entry : fs::directory_iterator(storage_ / "sessions")) {
    const fs::path dir = entry.path();
    if (!fs::exists(dir / "session.json")) continue;
    std::ifstream in(dir / "session.json");
    const Json j = Json::parse(in);
    auto s = std::make_shared<Session>();
    s->id = j.at("id").get<std::string>();
    s->dataset_id = j.at("dataset_id").get<std::string>();
    s->data = find_dataset(s->dataset_id);
    j.at("config").get_to(s->config);
    j.at("order").get_to(s->order);
    s->cursor = j.at("cursor").get<std::size_t>();
    s->token = j.at("token").get<std::uint64_t>();
    s->round = j.at("round").get<int>();
    s->closed = j.at("closed").get<bool>();
    s->model = std::make_shared<const MetricModel>(MetricModel::load(dir / "model.hvm"));
    const auto weak_count = j.at("weak_models").get<std::size_t>();
    for (std::size_t k = 0; k < weak_count; ++k) s->weak.push_back(MetricModel::load(dir / "weak" / weak_file(k)));
    for (const auto& pair : j.at("verified")) s->verified.emplace_back(pair.at(0), pair.at(1));
    j.at("pre_positions").get_to(s->pre_positions);
    j.at("final_best").get_to(s->final_best);
    j.at("final_mean").get_to(s->final_mean);
    s->ensembles = j.value("ensembles", std::size_t{0});

    std::vector<ProbeLog> logs;
    if (fs::exists(dir / "events.jsonl")) {
      std::ifstream events(dir / "events.jsonl");
      logs = read_event_log(events);
    }
    std::map<std::string, std::vector<const ProbeLog*>> by_probe;
    for (const auto& log : logs) by_probe[log.probe_id].push_back(&log);
    const auto events_for = [&](const std::string& probe_id) {
      std::vector<FeedbackEvent> out;
      auto it = by_probe.find(probe_id);
      if (it != by_probe.end()) {
        for (const ProbeLog* log : it->second) out.insert(out.end(), log->events.begin(), log->events.end());
      }
      return out;
    };
    for (const auto& c : j.at("completed")) {
      ProbeLog log{c.at("probe_id"), c.at("presented_at"), c.at("window_k"), {}};
      log.events = events_for(log.probe_id);
      s->completed_logs.push_back(std::move(log));
    }
    if (!s->complete()) {
      if (s->closed && !s->completed_logs.empty() && s->completed_logs.back().probe_id == s->probe().item_id) {
        s->current_log = s->completed_logs.back();
      } else {
        s->current_log = ProbeLog{s->probe().item_id, j.at("presented_at"), s->window(), events_for(s->probe().item_id)};
      }
    }
    bump(s->id, 1);
    std::unique_lock lock(mutex_);
    sessions_[s->id] = s;
  }
  next_id_ = std::max<std::uint64_t>(next_id_.load(), max_id + 1);
}

}  // namespace hvil
