#pragma once

#include <map>
#include <string>

// session.hpp pulls in Eigen, which must precede the resolver macros httplib brings in.
#include "magicpaint/service/session.hpp"
#include "httplib.h"

namespace magicpaint {

// Routes every request under /sessions to the API.
inline void bind_routes(httplib::Server& server, SessionApi& api) {
  auto forward = [&api](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query[k] = v;
    const ApiResponse r = api.handle(req.method, req.path, req.body, req.get_header_value("Content-Type"), query);
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Post(R"(/sessions(/.*)?)", forward);
  server.Get(R"(/sessions(/.*)?)", forward);
}

// Blocks until the server stops.
inline bool run_server(SessionApi& api, const std::string& host, int port) {
  httplib::Server server;
  bind_routes(server, api);
  return server.listen(host, port);
}

}  // namespace magicpaint
