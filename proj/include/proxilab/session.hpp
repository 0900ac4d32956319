#pragma once

#include "proxilab/atl.hpp"
#include "proxilab/dialogue.hpp"
#include "proxilab/geometry.hpp"
#include "proxilab/network.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace proxilab::service {

/// Request failure carrying the HTTP status the API layer should return.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, std::string code, const std::string& message)
      : std::runtime_error(message), status_(status), code_(std::move(code)) {}
  int status() const { return status_; }
  const std::string& code() const { return code_; }

 private:
  int status_;
  std::string code_;
};

struct ServiceConfig {
  atl::SamplerGrid grid = atl::SamplerGrid::defaults();
  atl::SamplerConfig sampler{};
  FineTuneConfig fine_tune{};
  double speed_mps = 0.33;
  /// Constant reaction delay: the recorded stop is moved inward by speed * latency.
  double stop_latency_s = 0.0;
  double holdout_fraction = 0.25;
  bool smooth = true;
  /// Empty: sessions live in memory only.
  std::filesystem::path store;
};

struct ApproachRecord {
  int approach_id = 0;
  double angle = 0.0;
  Point2 start_position = Point2::Zero();
  double approach_length = 0.0;
  int dialogue_index = 0;
  std::optional<double> stop_distance;
  std::optional<int> answer_index;
  std::int64_t served_at_ms = 0;
  std::optional<std::int64_t> stopped_at_ms;
};

struct Event {
  std::int64_t seq = 0;
  std::string type;
  std::int64_t time_ms = 0;
  std::string payload;  // JSON object text
};

struct CreateRequest {
  std::optional<std::string> session_id;
  RoomPolygon room = make_rectangle(0.0, 0.0, 1.0, 1.0);
  Pose2D user_pose;
  atl::Strategy strategy = atl::Strategy::atl;
  std::uint64_t seed = 0;
  /// Grouping tags for offline analysis; participant defaults to the session id.
  std::optional<std::string> participant;
  std::string condition = "ar";
};

struct NextResponse {
  int approach_id = 0;
  double angle = 0.0;
  Point2 start_position = Point2::Zero();
  double approach_length = 0.0;
  double speed_mps = 0.0;
  DialogueItem dialogue;
  int dialogue_index = 0;
};

struct StopRequest {
  int approach_id = 0;
  double stop_distance = 0.0;
  int answer_index = 0;
};

struct StopResponse {
  std::string robot_response;
  double recorded_distance = 0.0;
  std::size_t labeled_points = 0;
};

struct FinetuneResponse {
  double pre_mae = 0.0;
  double post_mae = 0.0;
  std::string model_ref;
  std::size_t train_points = 0;
  std::size_t heldout_points = 0;
  /// "heldout", or "train" when too few approaches exist to hold any out.
  std::string evaluated_on;
};

struct Heatmap {
  int resolution = 0;
  Point2 min_corner = Point2::Zero();
  Point2 max_corner = Point2::Zero();
  std::string model;  // "base" or "personalized"
  /// Row-major, row 0 at min y. Cells outside the room are empty.
  std::vector<std::optional<double>> values;
};

class Session;

/// Owns every live session. Handlers for different sessions run
/// concurrently; calls on one session are serialized.
class SessionManager {
 public:
  SessionManager(std::shared_ptr<const ProxemicsNetwork> base, std::vector<DialogueItem> dialogue,
                 ServiceConfig cfg = {});
  ~SessionManager();

  using Clock = std::function<std::int64_t()>;
  /// Milliseconds since the epoch; replaced in tests.
  void set_clock(Clock clock) { clock_ = std::move(clock); }

  /// Replays every session-<id>.jsonl found in the store directory.
  std::size_t load_store();

  std::string create(const CreateRequest& req);
  NextResponse next(const std::string& id);
  StopResponse stop(const std::string& id, const StopRequest& req);
  FinetuneResponse finetune(const std::string& id);
  Heatmap heatmap(const std::string& id, int resolution);
  /// Full JSONL event log.
  std::string export_log(const std::string& id);
  /// Rebuilds a session from an exported log; 409 if the id is taken.
  std::string import_log(const std::string& jsonl);

  /// Hash over the replay-relevant state (timestamps excluded).
  std::string state_digest(const std::string& id);
  /// Summary JSON: approaches, round, labeled count, digest.
  std::string state_json(const std::string& id);

  std::vector<std::string> session_ids() const;
  const ServiceConfig& config() const { return cfg_; }
  const ProxemicsNetwork& base_model() const { return *base_; }

 private:
  std::shared_ptr<Session> find(const std::string& id) const;
  /// Re-executes the request events of a log. Strict mode also requires the
  /// derived events to match; lenient mode (store recovery) regenerates them.
  std::shared_ptr<Session> replay(const std::vector<Event>& events, bool strict) const;
  void insert(const std::shared_ptr<Session>& s);

  std::shared_ptr<const ProxemicsNetwork> base_;
  std::vector<DialogueItem> dialogue_;
  ServiceConfig cfg_;
  Clock clock_;
  mutable std::shared_mutex map_mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
};

std::vector<Event> parse_event_log(const std::string& jsonl);
std::string event_to_json_line(const Event& e);

/// {session_id?, room: {vertices}, user_pose: {x, y, heading}, strategy, seed,
/// participant?, condition?}.
/// Throws std::invalid_argument on malformed or invalid input.
CreateRequest create_request_from_json(const std::string& text);
std::string create_request_to_json(const CreateRequest& req);

}  // namespace proxilab::service
