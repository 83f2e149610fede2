#pragma once

#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "collab/peerd/peer.hpp"

namespace collab::peerd {

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

int http_status_for(Errc code);

// The loopback HTTP/JSON surface, transport-free: the daemon feeds it from
// its HTTP server on the protocol loop, tests call it directly.
//
//   GET  /api/self                      POST /api/self {availability, location}
//   GET  /api/roster
//   GET  /api/venues                    POST /api/venues {name, visibility}
//   POST /api/venues/{id}/join          POST /api/venues/{id}/leave
//   POST /api/venues/{id}/invite {fingerprint}
//   POST /api/venues/{id}/public
//   GET  /api/venues/{id}/messages      POST /api/venues/{id}/messages {body}
//   GET  /api/notes                     POST /api/notes {recipient, body}
//   GET  /api/shares                    POST /api/shares {path, tags}
//   POST /api/search {q}                GET  /api/search/{id}/hits
//   GET  /api/transfers                 POST /api/transfers {query_id, entry_id, responder?, dest?}
//   GET  /api/events?since=&max=
class ControlApi {
 public:
  explicit ControlApi(Peer& peer) : peer_(peer) {}
  ApiResponse handle(const ApiRequest& req);

 private:
  ApiResponse route(const ApiRequest& req, const std::vector<std::string>& parts, const nlohmann::json& body);

  Peer& peer_;
};

}  // namespace collab::peerd
