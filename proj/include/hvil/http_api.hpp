#pragma once

#include <memory>
#include <string>
#include <utility>

#include "hvil/error.hpp"
#include "hvil/json_io.hpp"
#include "hvil/service.hpp"

namespace httplib {
class Server;
}

namespace hvil {

/// HTTP status for a library error code.
int http_status(ErrorCode code);

/// JSON API over a SessionService:
///   POST /sessions                    {dataset_id, config?}
///   GET  /sessions/{id}/probe
///   GET  /sessions/{id}/ranking       ?top_k=&probe_id=
///   POST /sessions/{id}/feedback      {probe_id, gallery_item_id, label, token?}
///   POST /sessions/{id}/advance
///   POST /sessions/{id}/ensemble      RMEL config
///   GET  /reports/{id}
///   POST /benchmarks                  {dataset_id, config?, seeds}
///   GET  /datasets
///   GET  /images/{dataset}/{item_id}
/// Errors come back as {"error": {"code", "message"}}.
class ApiServer {
 public:
  explicit ApiServer(SessionService& service);
  ~ApiServer();

  /// Binds to `host` on `port` (0 picks a free port) and returns the port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool serve();
  void stop();
  void wait_until_ready() const;

 private:
  SessionService& service_;
  std::unique_ptr<httplib::Server> server_;
};

/// Splits HVIL_BIND-style "host:port" (either part optional).
std::pair<std::string, int> parse_bind_address(const std::string& text, const std::string& default_host,
                                                int default_port);

}  // namespace hvil
