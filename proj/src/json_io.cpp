#include "hvil/json_io.hpp"

#include <string>

#include "hvil/error.hpp"

namespace hvil {

namespace {

std::string_view scope_name(ViolatorScope s) { return s == ViolatorScope::kWindow ? "window" : "gallery"; }

ViolatorScope parse_scope(const std::string& s) {
  if (s == "window") return ViolatorScope::kWindow;
  if (s == "gallery") return ViolatorScope::kGallery;
  throw Error(ErrorCode::kInvalidArgument, "unknown violator_scope '" + s + "'");
}

std::string_view init_name(RmelInit i) {
  switch (i) {
    case RmelInit::kIdentity: return "identity";
    case RmelInit::kScaledIdentity: return "scaled_identity";
    case RmelInit::kRandomPsd: return "random_psd";
  }
  return "identity";
}

RmelInit parse_init(const std::string& s) {
  if (s == "identity") return RmelInit::kIdentity;
  if (s == "scaled_identity") return RmelInit::kScaledIdentity;
  if (s == "random_psd") return RmelInit::kRandomPsd;
  throw Error(ErrorCode::kInvalidArgument, "unknown rmel init '" + s + "'");
}

template <typename T>
void read_if(const Json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

void to_json(Json& j, const HvilConfig& c) {
  j = Json{{"eta", c.eta},
           {"max_rounds_per_probe", c.max_rounds_per_probe},
           {"window_k", c.window_k},
           {"jitter", c.jitter},
           {"violator_scope", scope_name(c.violator_scope)},
           {"verify_factorization", c.verify_factorization}};
}

void from_json(const Json& j, HvilConfig& c) {
  read_if(j, "eta", c.eta);
  read_if(j, "max_rounds_per_probe", c.max_rounds_per_probe);
  read_if(j, "window_k", c.window_k);
  read_if(j, "jitter", c.jitter);
  if (j.contains("violator_scope")) c.violator_scope = parse_scope(j.at("violator_scope").get<std::string>());
  read_if(j, "verify_factorization", c.verify_factorization);
}

void to_json(Json& j, const OraclePolicy& p) {
  j = Json{{"window_k", p.window_k},
           {"max_rounds", p.max_rounds},
           {"strongness_quantile", p.strongness_quantile},
           {"noise_rate", p.noise_rate},
           {"seconds_per_item", p.seconds_per_item}};
}

void from_json(const Json& j, OraclePolicy& p) {
  read_if(j, "window_k", p.window_k);
  read_if(j, "max_rounds", p.max_rounds);
  read_if(j, "strongness_quantile", p.strongness_quantile);
  read_if(j, "noise_rate", p.noise_rate);
  read_if(j, "seconds_per_item", p.seconds_per_item);
}

void to_json(Json& j, const RmelConfig& c) {
  j = Json{{"nu", c.nu},           {"step", c.step}, {"max_iters", c.max_iters}, {"init", init_name(c.init)},
           {"seed", c.seed},       {"tolerance", c.tolerance}, {"diagonal_only", c.diagonal_only}};
}

void from_json(const Json& j, RmelConfig& c) {
  read_if(j, "nu", c.nu);
  read_if(j, "step", c.step);
  read_if(j, "max_iters", c.max_iters);
  if (j.contains("init")) c.init = parse_init(j.at("init").get<std::string>());
  read_if(j, "seed", c.seed);
  read_if(j, "tolerance", c.tolerance);
  read_if(j, "diagonal_only", c.diagonal_only);
}

void to_json(Json& j, const SyntheticSpec& s) {
  j = Json{{"n_identities", s.n_identities},
           {"dim", s.dim},
           {"nuisance_rank", s.nuisance_rank},
           {"transform_scale", s.transform_scale},
           {"sigma", s.sigma},
           {"nuisance_strength", s.nuisance_strength},
           {"probe_shots", s.probe_shots},
           {"gallery_shots", s.gallery_shots},
           {"seed", s.seed}};
}

void from_json(const Json& j, SyntheticSpec& s) {
  read_if(j, "n_identities", s.n_identities);
  read_if(j, "dim", s.dim);
  read_if(j, "nuisance_rank", s.nuisance_rank);
  read_if(j, "transform_scale", s.transform_scale);
  read_if(j, "sigma", s.sigma);
  read_if(j, "nuisance_strength", s.nuisance_strength);
  read_if(j, "probe_shots", s.probe_shots);
  read_if(j, "gallery_shots", s.gallery_shots);
  read_if(j, "seed", s.seed);
}

void to_json(Json& j, const FeedbackEvent& e) {
  j = Json{{"probe_id", e.probe_id},
           {"gallery_item_id", e.gallery_item_id},
           {"label", to_string(e.label)},
           {"wall_time", e.wall_time},
           {"rank_at_selection", e.rank_at_selection}};
}

void from_json(const Json& j, FeedbackEvent& e) {
  j.at("probe_id").get_to(e.probe_id);
  j.at("gallery_item_id").get_to(e.gallery_item_id);
  e.label = parse_feedback_label(j.at("label").get<std::string>());
  e.wall_time = j.value("wall_time", 0.0);
  e.rank_at_selection = j.value("rank_at_selection", std::size_t{0});
}

Json summary_json(const RankingSummary& s) {
  Json j{{"expected_rank", s.expected_rank}, {"map", s.map}, {"evaluated", s.curve.evaluated},
         {"excluded", s.curve.excluded}};
  for (std::size_t k : {1, 5, 10, 20}) j["rank" + std::to_string(k)] = s.curve.rank(k);
  j["cmc"] = s.curve.rates;
  return j;
}

Json effort_json(const EffortStats& s) {
  return Json{{"empty", s.empty},
              {"probes", s.probes},
              {"found_matches_pct", s.found_matches_pct},
              {"mean_browsed_images", s.mean_browsed_images},
              {"mean_feedback_count", s.mean_feedback_count},
              {"mean_search_time_sec", s.mean_search_time_sec}};
}

Json ranking_json(const RankedList& list, std::size_t top_k) {
  Json out = Json::array();
  for (std::size_t pos = 0; pos < list.size() && pos < top_k; ++pos) {
    out.push_back(Json{{"item_id", list[pos].item_id}, {"score", list[pos].score}, {"position", pos}});
  }
  return out;
}

void write_event_log(std::ostream& out, const std::vector<ProbeLog>& logs) {
  for (const auto& log : logs) {
    for (std::size_t round = 0; round < log.events.size(); ++round) {
      Json line = log.events[round];
      line["presented_at"] = log.presented_at;
      line["window_k"] = log.window_k;
      line["round"] = round;
      out << line.dump() << '\n';
    }
  }
}

std::vector<ProbeLog> read_event_log(std::istream& in) {
  std::vector<ProbeLog> logs;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kMalformedHeader, "event log line " + std::to_string(line_no) + ": " + e.what());
    }
    FeedbackEvent event = j.get<FeedbackEvent>();
    const std::size_t round = j.value("round", std::size_t{0});
    if (round == 0 || logs.empty() || logs.back().probe_id != event.probe_id) {
      ProbeLog log;
      log.probe_id = event.probe_id;
      log.presented_at = j.value("presented_at", 0.0);
      log.window_k = j.value("window_k", std::size_t{0});
      logs.push_back(std::move(log));
    }
    logs.back().events.push_back(std::move(event));
  }
  return logs;
}

}  // namespace hvil
