#include "proxilab/http_service.hpp"

#include "proxilab/errors.hpp"

#include "httplib.h"
#include "json.hpp"

#include <regex>

namespace proxilab::service {

using nlohmann::json;

namespace {

ApiResponse error(int status, const std::string& code, const std::string& message) {
  return {status, json{{"code", code}, {"message", message}}.dump()};
}

ApiResponse ok(int status, const json& body) { return {status, body.dump()}; }

json point_json(const Point2& p) { return json::array({p.x(), p.y()}); }

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ApiError(400, "bad_request", std::string("malformed JSON body: ") + e.what());
  }
}

ApiResponse route(SessionManager& sm, const ApiRequest& req) {
  static const std::regex session_re("^/sessions/([A-Za-z0-9_-]+)(/[a-z]+)?$");
  const std::string& m = req.method;

  if (req.path == "/health") {
    if (m != "GET") return error(405, "method_not_allowed", "use GET");
    return ok(200, json{{"status", "ok"}, {"sessions", sm.session_ids().size()}});
  }
  if (req.path == "/sessions") {
    if (m == "POST") {
      CreateRequest cr;
      try {
        cr = create_request_from_json(req.body);
      } catch (const std::invalid_argument& e) {
        throw ApiError(400, "bad_request", e.what());
      }
      return ok(201, json{{"session_id", sm.create(cr)}});
    }
    if (m == "GET") return ok(200, json{{"sessions", sm.session_ids()}});
    return error(405, "method_not_allowed", "use GET or POST");
  }
  if (req.path == "/sessions/import") {
    if (m != "POST") return error(405, "method_not_allowed", "use POST");
    return ok(201, json{{"session_id", sm.import_log(req.body)}});
  }

  std::smatch match;
  if (!std::regex_match(req.path, match, session_re)) return error(404, "not_found", "no route for " + req.path);
  const std::string id = match[1];
  const std::string action = match[2].matched ? match[2].str() : "";

  if (action.empty()) {
    if (m != "GET") return error(405, "method_not_allowed", "use GET");
    return ok(200, json::parse(sm.state_json(id)));
  }
  if (action == "/next") {
    if (m != "GET") return error(405, "method_not_allowed", "use GET");
    const auto r = sm.next(id);
    return ok(200, json{{"approach_id", r.approach_id},
                        {"angle", r.angle},
                        {"start_position", point_json(r.start_position)},
                        {"approach_length", r.approach_length},
                        {"speed_mps", r.speed_mps},
                        {"dialogue_index", r.dialogue_index},
                        {"dialogue", json::parse(dialogue_item_to_json(r.dialogue))}});
  }
  if (action == "/stop") {
    if (m != "POST") return error(405, "method_not_allowed", "use POST");
    const json b = parse_body(req.body);
    StopRequest sr;
    try {
      sr.approach_id = b.at("approach_id").get<int>();
      sr.stop_distance = b.at("stop_distance").get<double>();
      sr.answer_index = b.at("answer_index").get<int>();
    } catch (const json::exception& e) {
      throw ApiError(400, "bad_request", std::string("stop needs approach_id, stop_distance, answer_index: ") + e.what());
    }
    const auto r = sm.stop(id, sr);
    return ok(200, json{{"robot_response", r.robot_response},
                        {"recorded_distance", r.recorded_distance},
                        {"labeled_points", r.labeled_points}});
  }
  if (action == "/finetune") {
    if (m != "POST") return error(405, "method_not_allowed", "use POST");
    const auto r = sm.finetune(id);
    return ok(200, json{{"pre_mae", r.pre_mae},
                        {"post_mae", r.post_mae},
                        {"model_ref", r.model_ref},
                        {"train_points", r.train_points},
                        {"heldout_points", r.heldout_points},
                        {"evaluated_on", r.evaluated_on}});
  }
  if (action == "/heatmap") {
    if (m != "GET") return error(405, "method_not_allowed", "use GET");
    int resolution = 32;
    if (auto it = req.query.find("resolution"); it != req.query.end()) {
      try {
        std::size_t used = 0;
        resolution = std::stoi(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument("trailing characters");
      } catch (const std::exception&) {
        throw ApiError(400, "bad_request", "resolution must be an integer");
      }
    }
    const auto h = sm.heatmap(id, resolution);
    json rows = json::array();
    for (int r = 0; r < h.resolution; ++r) {
      json row = json::array();
      for (int c = 0; c < h.resolution; ++c) {
        const auto& v = h.values[static_cast<std::size_t>(r) * h.resolution + c];
        row.push_back(v ? json(*v) : json(nullptr));
      }
      rows.push_back(std::move(row));
    }
    return ok(200, json{{"resolution", h.resolution},
                        {"min_corner", point_json(h.min_corner)},
                        {"max_corner", point_json(h.max_corner)},
                        {"model", h.model},
                        {"values", rows}});
  }
  if (action == "/export") {
    if (m != "GET") return error(405, "method_not_allowed", "use GET");
    return {200, sm.export_log(id), "application/x-ndjson"};
  }
  return error(404, "not_found", "no route for " + req.path);
}

}  // namespace

ApiResponse handle_request(SessionManager& sessions, const ApiRequest& req) {
  try {
    return route(sessions, req);
  } catch (const ApiError& e) {
    return error(e.status(), e.code(), e.what());
  } catch (const std::invalid_argument& e) {
    return error(400, "bad_request", e.what());
  } catch (const OutsideRoom& e) {
    return error(400, "bad_request", e.what());
  } catch (const DegenerateScenario& e) {
    return error(400, "bad_request", e.what());
  } catch (const std::exception& e) {
    return error(500, "internal", e.what());
  }
}

struct HttpServer::Impl {
  explicit Impl(SessionManager& s) : sessions(s) {}
  SessionManager& sessions;
  httplib::Server server;
};

HttpServer::HttpServer(SessionManager& sessions) : impl_(std::make_unique<Impl>(sessions)) {
  auto handler = [this](const httplib::Request& hreq, httplib::Response& hres) {
    ApiRequest req{hreq.method, hreq.path, {}, hreq.body};
    for (const auto& [k, v] : hreq.params) req.query[k] = v;
    const ApiResponse r = handle_request(impl_->sessions, req);
    hres.status = r.status;
    hres.set_content(r.body, r.content_type);
  };
  const std::string any = ".*";
  impl_->server.Get(any, handler);
  impl_->server.Post(any, handler);
  impl_->server.Put(any, handler);
  impl_->server.Delete(any, handler);
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

bool HttpServer::listen() { return impl_->server.listen_after_bind(); }

void HttpServer::stop() { impl_->server.stop(); }

void HttpServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace proxilab::service
