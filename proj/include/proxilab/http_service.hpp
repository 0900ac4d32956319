#pragma once

#include "proxilab/session.hpp"

#include <map>
#include <memory>
#include <string>

namespace proxilab::service {

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

/// Routes one request to the session manager. Failures become
/// {"code", "message"} bodies; this function does not throw.
ApiResponse handle_request(SessionManager& sessions, const ApiRequest& req);

/// Blocking HTTP front end over handle_request.
class HttpServer {
 public:
  explicit HttpServer(SessionManager& sessions);
  ~HttpServer();

  /// Binds to host:port (port 0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop() is called; false if the accept loop failed.
  bool listen();
  void stop();
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace proxilab::service
