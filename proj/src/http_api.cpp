#include "hvil/http_api.hpp"

#include <httplib.h>

#include <fstream>
#include <sstream>

#include "hvil/error.hpp"

namespace hvil {

namespace {

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, Json{{"error", {{"code", code}, {"message", message}}}});
}

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    Json j = Json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::kInvalidArgument, "request body must be a JSON object");
    return j;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvalidArgument, std::string("invalid JSON body: ") + e.what());
  }
}

template <typename Handler>
httplib::Server::Handler guarded(Handler handler) {
  return [handler](const httplib::Request& req, httplib::Response& res) {
    try {
      handler(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), to_string(e.code()), e.what());
    } catch (const Json::exception& e) {
      send_error(res, 400, to_string(ErrorCode::kInvalidArgument), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

std::string content_type_for(const std::string& path) {
  const auto dot = path.rfind('.');
  const std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "png") return "image/png";
  if (ext == "jpg" || ext == "jpeg") return "image/jpeg";
  if (ext == "gif") return "image/gif";
  if (ext == "bmp") return "image/bmp";
  if (ext == "svg") return "image/svg+xml";
  return "application/octet-stream";
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kStaleToken:
    case ErrorCode::kBudgetExhausted:
    case ErrorCode::kProbeClosed: return 409;
    case ErrorCode::kOutOfWindow:
    case ErrorCode::kDegenerateInput:
    case ErrorCode::kRankOutOfRange: return 422;
    case ErrorCode::kNotPositiveDefinite:
    case ErrorCode::kNumericalBlowup:
    case ErrorCode::kIo: return 500;
    default: return 400;
  }
}

ApiServer::ApiServer(SessionService& service) : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;
  SessionService& svc = service_;

  srv.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const Json body = parse_body(req);
             SessionConfig config;
             if (body.contains("config")) body.at("config").get_to(config);
             const auto id = svc.create_session(body.at("dataset_id").get<std::string>(), config);
             send_json(res, 201, Json{{"session_id", id}});
           }));

  srv.Get(R"(/sessions/([^/]+)/probe)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, to_json_value(svc.current_probe(req.matches[1])));
          }));

  srv.Get(R"(/sessions/([^/]+)/ranking)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            std::size_t top_k = 50;
            if (req.has_param("top_k")) {
              try {
                const long long k = std::stoll(req.get_param_value("top_k"));
                if (k < 1) throw Error(ErrorCode::kInvalidArgument, "top_k must be >= 1");
                top_k = static_cast<std::size_t>(k);
              } catch (const std::logic_error&) {
                throw Error(ErrorCode::kInvalidArgument, "top_k must be an integer");
              }
            }
            std::optional<std::string> probe;
            if (req.has_param("probe_id")) probe = req.get_param_value("probe_id");
            send_json(res, 200, to_json_value(svc.get_ranking(req.matches[1], probe, top_k)));
          }));

  srv.Post(R"(/sessions/([^/]+)/feedback)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const Json body = parse_body(req);
             FeedbackRequest fb;
             fb.probe_id = body.at("probe_id").get<std::string>();
             fb.gallery_item_id = body.at("gallery_item_id").get<std::string>();
             fb.label = parse_feedback_label(body.at("label").get<std::string>());
             if (body.contains("token") && !body.at("token").is_null()) fb.token = body.at("token").get<std::uint64_t>();
             send_json(res, 200, to_json_value(svc.submit_feedback(req.matches[1], fb)));
           }));

  srv.Post(R"(/sessions/([^/]+)/advance)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             send_json(res, 200, to_json_value(svc.advance_probe(req.matches[1])));
           }));

  srv.Post(R"(/sessions/([^/]+)/ensemble)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             RmelConfig config;
             parse_body(req).get_to(config);
             send_json(res, 201, to_json_value(svc.train_ensemble(req.matches[1], config)));
           }));

  srv.Get(R"(/reports/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            send_json(res, 200, svc.report(req.matches[1]));
          }));

  srv.Post("/benchmarks", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
             const Json body = parse_body(req);
             BenchmarkConfig config;
             if (body.contains("config")) body.at("config").get_to(config);
             std::vector<std::uint64_t> seeds{0};
             if (body.contains("seeds")) body.at("seeds").get_to(seeds);
             const auto id = svc.run_simulated_benchmark(body.at("dataset_id").get<std::string>(), config, seeds);
             send_json(res, 201, Json{{"report_id", id}});
           }));

  srv.Get("/datasets", guarded([&svc](const httplib::Request&, httplib::Response& res) {
            send_json(res, 200, Json{{"datasets", svc.dataset_ids()}});
          }));

  srv.Get(R"(/images/([^/]+)/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
            const auto path = svc.image_path(req.matches[1], req.matches[2]);
            if (!path) throw Error(ErrorCode::kNotFound, "no image for item '" + std::string(req.matches[2]) + "'");
            std::ifstream in(*path, std::ios::binary);
            std::ostringstream bytes;
            bytes << in.rdbuf();
            res.set_content(bytes.str(), content_type_for(path->string()));
          }));

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, "not_found", "no such route");
  });
}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = server_->bind_to_any_port(host);
    if (bound < 0) throw Error(ErrorCode::kIo, "cannot bind " + host);
    return bound;
  }
  if (!server_->bind_to_port(host, port)) throw Error(ErrorCode::kIo, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

bool ApiServer::serve() { return server_->listen_after_bind(); }

void ApiServer::stop() {
  if (server_) server_->stop();
}

void ApiServer::wait_until_ready() const { server_->wait_until_ready(); }

std::pair<std::string, int> parse_bind_address(const std::string& text, const std::string& default_host,
                                               int default_port) {
  if (text.empty()) return {default_host, default_port};
  const auto colon = text.rfind(':');
  if (colon == std::string::npos) return {text, default_port};
  std::string host = text.substr(0, colon);
  if (host.empty()) host = default_host;
  const std::string port_text = text.substr(colon + 1);
  if (port_text.empty()) return {host, default_port};
  try {
    const int port = std::stoi(port_text);
    if (port < 0 || port > 65535) throw std::out_of_range("port");
    return {host, port};
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidArgument, "invalid bind address '" + text + "'");
  }
}

}  // namespace hvil
