#include "proxilab/session.hpp"

#include "proxilab/errors.hpp"
#include "proxilab/rng.hpp"

#include "json.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace proxilab::service {

using nlohmann::json;

namespace {

constexpr const char* kCreated = "session_created";
constexpr const char* kPool = "pool_generated";
constexpr const char* kSelected = "angles_selected";
constexpr const char* kServed = "approach_served";
constexpr const char* kStopped = "stop_recorded";
constexpr const char* kRetrained = "discriminator_retrained";
constexpr const char* kFinetuned = "finetuned";

bool is_request_event(const std::string& type) {
  return type == kCreated || type == kServed || type == kStopped || type == kFinetuned;
}

json point_json(const Point2& p) { return json::array({p.x(), p.y()}); }

json room_json(const RoomPolygon& room) {
  json v = json::array();
  for (const auto& p : room.vertices()) v.push_back(point_json(p));
  return json{{"vertices", v}};
}

json pose_json(const Pose2D& p) { return json{{"x", p.x}, {"y", p.y}, {"heading", p.heading}}; }

void write_all(int fd, const std::string& data, const std::filesystem::path& path) {
  const char* ptr = data.data();
  std::size_t left = data.size();
  while (left > 0) {
    const ssize_t n = ::write(fd, ptr, left);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("write failed: " + path.string());
    }
    ptr += n;
    left -= static_cast<std::size_t>(n);
  }
}

/// Appends (or rewrites) and fsyncs before returning.
void durable_write(const std::filesystem::path& path, const std::string& data, bool truncate) {
  const int flags = O_WRONLY | O_CREAT | (truncate ? O_TRUNC : O_APPEND);
  const int fd = ::open(path.c_str(), flags, 0644);
  if (fd < 0) throw IoError("cannot open " + path.string());
  try {
    write_all(fd, data, path);
    if (::fsync(fd) != 0) throw IoError("fsync failed: " + path.string());
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
}

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream out;
  out << std::hex;
  out.width(16);
  out.fill('0');
  out << h;
  return out.str();
}

std::string generate_id(std::uint64_t seed, int attempt) {
  std::ostringstream out;
  out << "s" << std::hex;
  out.width(12);
  out.fill('0');
  out << (splitmix(seed * 0x100000001b3ULL + static_cast<std::uint64_t>(attempt)) >> 16);
  return out.str();
}

bool valid_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'; });
}

}  // namespace

CreateRequest create_request_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("malformed JSON: ") + e.what());
  }
  try {
    CreateRequest req;
    if (j.contains("session_id") && !j["session_id"].is_null()) req.session_id = j["session_id"].get<std::string>();
    std::vector<Point2> pts;
    for (const auto& p : j.at("room").at("vertices")) {
      if (!p.is_array() || p.size() != 2) throw std::invalid_argument("room vertices must be [x, y] pairs");
      pts.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    req.room = RoomPolygon(std::move(pts));
    const json& u = j.at("user_pose");
    req.user_pose = Pose2D(u.at("x").get<double>(), u.at("y").get<double>(), u.value("heading", 0.0));
    req.strategy = atl::strategy_from_string(j.value("strategy", std::string("atl")));
    req.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("participant") && !j["participant"].is_null()) req.participant = j["participant"].get<std::string>();
    req.condition = j.value("condition", std::string("ar"));
    if (req.condition.empty() || req.condition.size() > 64) throw std::invalid_argument("condition must be 1-64 characters");
    if (req.participant && (req.participant->empty() || req.participant->size() > 64)) {
      throw std::invalid_argument("participant must be 1-64 characters");
    }
    return req;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("invalid session request: ") + e.what());
  }
}

std::string create_request_to_json(const CreateRequest& req) {
  json j{{"room", room_json(req.room)},
         {"user_pose", pose_json(req.user_pose)},
         {"strategy", atl::to_string(req.strategy)},
         {"seed", req.seed},
         {"condition", req.condition}};
  if (req.session_id) j["session_id"] = *req.session_id;
  if (req.participant) j["participant"] = *req.participant;
  return j.dump();
}

std::string event_to_json_line(const Event& e) {
  json j{{"seq", e.seq}, {"type", e.type}, {"time_ms", e.time_ms}, {"payload", json::parse(e.payload)}};
  return j.dump();
}

std::vector<Event> parse_event_log(const std::string& jsonl) {
  std::vector<Event> events;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Event e;
      e.seq = j.at("seq").get<std::int64_t>();
      e.type = j.at("type").get<std::string>();
      e.time_ms = j.value("time_ms", std::int64_t{0});
      e.payload = j.at("payload").dump();
      if (e.seq != static_cast<std::int64_t>(events.size()) + 1) {
        throw ParseError("event log line " + std::to_string(lineno) + ": expected seq " +
                         std::to_string(events.size() + 1) + ", got " + std::to_string(e.seq));
      }
      events.push_back(std::move(e));
    } catch (const json::exception& ex) {
      throw ParseError("event log line " + std::to_string(lineno) + ": " + ex.what());
    }
  }
  if (events.empty()) throw ParseError("event log is empty");
  if (events.front().type != kCreated) throw ParseError("event log must start with session_created");
  return events;
}

struct Context {
  const ProxemicsNetwork& base;
  const std::vector<DialogueItem>& dialogue;
  const ServiceConfig& cfg;
};

class Session {
 public:
  Session(std::string id, CreateRequest req, atl::SamplerState sampler)
      : id(std::move(id)), req(std::move(req)), sampler(std::move(sampler)) {}

  std::mutex mu;
  std::string id;
  CreateRequest req;
  atl::SamplerState sampler;
  std::deque<double> queue;
  std::vector<ApproachRecord> approaches;
  int dialogue_cursor = 0;
  std::optional<ProxemicsNetwork> personalized;
  std::optional<FinetuneResponse> last_finetune;
  std::size_t finetune_stops = 0;
  std::vector<Event> log;
  /// Directory to append to; empty while replaying or without a store.
  std::filesystem::path store;

  std::filesystem::path log_path() const { return store / ("session-" + id + ".jsonl"); }
  std::string model_ref() const { return "model-" + id + ".json"; }

  void append(const char* type, std::int64_t time_ms, const json& payload) {
    Event e{static_cast<std::int64_t>(log.size()) + 1, type, time_ms, payload.dump()};
    if (!store.empty()) durable_write(log_path(), event_to_json_line(e) + "\n", false);
    log.push_back(std::move(e));
  }

  const ApproachRecord* pending() const {
    if (approaches.empty() || approaches.back().stop_distance) return nullptr;
    return &approaches.back();
  }

  std::size_t stop_count() const {
    return static_cast<std::size_t>(std::count_if(approaches.begin(), approaches.end(),
                                                  [](const ApproachRecord& r) { return r.stop_distance.has_value(); }));
  }

  void log_retrain(std::int64_t now) {
    const auto& d = *sampler.discriminator;
    append(kRetrained, now,
           json{{"retrain_count", sampler.retrain_count},
                {"iterations", d.iterations},
                {"final_loss", d.final_loss},
                {"n_application", d.n_application},
                {"n_training", d.n_training}});
  }

  void plan(std::int64_t now) {
    std::vector<double> angles;
    std::vector<double> confidences;
    bool fallback = false;
    try {
      angles = atl::plan_round(sampler);
      if (sampler.strategy == atl::Strategy::atl) {
        confidences = atl::select_angles(*sampler.discriminator, sampler.pool, static_cast<int>(angles.size())).confidences;
      }
    } catch (const std::runtime_error&) {
      // Every ATL candidate has been passed through: keep the session going
      // with uniform draws.
      fallback = true;
      std::vector<double> available;
      for (const auto& c : sampler.pool.candidates) {
        if (std::find(available.begin(), available.end(), c.angle) == available.end()) available.push_back(c.angle);
      }
      std::sort(available.begin(), available.end());
      std::uniform_int_distribution<std::size_t> pick(0, available.size() - 1);
      for (int i = 0; i < sampler.cfg.angles_per_round; ++i) angles.push_back(available[pick(sampler.rng)]);
      ++sampler.round;
      sampler.selections.push_back(angles);
    }
    queue.assign(angles.begin(), angles.end());
    json payload{{"round", sampler.round}, {"angles", angles}, {"fallback", fallback}};
    if (!confidences.empty()) payload["confidences"] = confidences;
    append(kSelected, now, payload);
  }

  NextResponse next(const Context& ctx, std::int64_t now) {
    if (const auto* p = pending()) {
      throw ApiError(409, "conflict", "approach " + std::to_string(p->approach_id) + " is still pending a stop");
    }
    if (queue.empty()) plan(now);
    const double angle = queue.front();
    queue.pop_front();

    double used = 0.0;
    const Point2 start =
        atl::approach_start(sampler.pool.room, sampler.pool.user, angle, sampler.pool.grid.approach_length, &used);

    ApproachRecord rec;
    rec.approach_id = static_cast<int>(approaches.size()) + 1;
    rec.angle = angle;
    rec.start_position = start;
    rec.approach_length = used;
    rec.dialogue_index = dialogue_cursor % static_cast<int>(ctx.dialogue.size());
    rec.served_at_ms = now;

    append(kServed, now,
           json{{"approach_id", rec.approach_id},
                {"angle", rec.angle},
                {"start_position", point_json(start)},
                {"approach_length", used},
                {"dialogue_index", rec.dialogue_index}});
    dialogue_cursor = (dialogue_cursor + 1) % static_cast<int>(ctx.dialogue.size());
    approaches.push_back(rec);

    return NextResponse{rec.approach_id, angle, start, used, ctx.cfg.speed_mps, ctx.dialogue[rec.dialogue_index],
                        rec.dialogue_index};
  }

  StopResponse stop(const Context& ctx, const StopRequest& req, std::int64_t now) {
    const auto* p = pending();
    if (!p) throw ApiError(409, "conflict", "no approach is pending");
    if (req.approach_id != p->approach_id) {
      throw ApiError(409, "conflict",
                     "approach " + std::to_string(req.approach_id) + " is stale; pending approach is " +
                         std::to_string(p->approach_id));
    }
    if (req.answer_index != 0 && req.answer_index != 1) throw ApiError(400, "bad_request", "answer_index must be 0 or 1");
    if (!std::isfinite(req.stop_distance) || req.stop_distance <= 0.0 || req.stop_distance > p->approach_length) {
      std::ostringstream msg;
      msg << "stop_distance must be in (0, " << p->approach_length << "]";
      throw ApiError(400, "bad_request", msg.str());
    }
    double recorded = req.stop_distance - ctx.cfg.speed_mps * ctx.cfg.stop_latency_s;
    recorded = std::clamp(recorded, 0.05, p->approach_length);

    append(kStopped, now,
           json{{"approach_id", req.approach_id},
                {"stop_distance", req.stop_distance},
                {"answer_index", req.answer_index},
                {"recorded_distance", recorded}});

    auto& rec = approaches.back();
    rec.stop_distance = recorded;
    rec.answer_index = req.answer_index;
    rec.stopped_at_ms = now;
    atl::record_stop(sampler, rec.angle, recorded);
    if (sampler.strategy == atl::Strategy::atl) {
      atl::retrain(sampler);
      log_retrain(now);
    }
    return StopResponse{ctx.dialogue[rec.dialogue_index].responses[req.answer_index], recorded,
                        sampler.labeled.size()};
  }

  FinetuneResponse finetune(const Context& ctx, std::int64_t now) {
    const std::size_t stops = stop_count();
    if (stops == 0) throw ApiError(409, "conflict", "no recorded stops to fine-tune on");
    if (last_finetune && finetune_stops == stops) return *last_finetune;

    std::vector<const ApproachRecord*> done;
    for (const auto& r : approaches) {
      if (r.stop_distance) done.push_back(&r);
    }
    const auto n_hold = static_cast<std::size_t>(std::floor(ctx.cfg.holdout_fraction * static_cast<double>(done.size())));
    std::vector<std::size_t> order(done.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(splitmix(req.seed ^ splitmix(stops)));
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<LabeledExample> train, heldout;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto* r = done[order[i]];
      auto labels = atl::stop_to_labels(r->angle, *r->stop_distance, sampler.pool.room, sampler.pool.user,
                                        sampler.cfg.labels);
      auto& dst = i < n_hold ? heldout : train;
      dst.insert(dst.end(), labels.begin(), labels.end());
    }
    if (train.empty()) throw ApiError(409, "conflict", "recorded stops produced no labels inside the room");

    FineTuneConfig ft = ctx.cfg.fine_tune;
    ft.seed = req.seed;
    ProxemicsNetwork tuned = fine_tune(ctx.base, train, ft);

    const auto& eval = heldout.empty() ? train : heldout;
    FinetuneResponse out;
    out.pre_mae = mean_absolute_error(ctx.base, eval, ctx.cfg.smooth);
    out.post_mae = mean_absolute_error(tuned, eval, ctx.cfg.smooth);
    out.model_ref = model_ref();
    out.train_points = train.size();
    out.heldout_points = heldout.size();
    out.evaluated_on = heldout.empty() ? "train" : "heldout";

    if (!store.empty()) save_model(tuned, store / out.model_ref);
    append(kFinetuned, now,
           json{{"stops", stops},
                {"pre_mae", out.pre_mae},
                {"post_mae", out.post_mae},
                {"model_ref", out.model_ref},
                {"train_points", out.train_points},
                {"heldout_points", out.heldout_points},
                {"evaluated_on", out.evaluated_on}});
    personalized = std::move(tuned);
    last_finetune = out;
    finetune_stops = stops;
    return out;
  }

  Heatmap heatmap(const Context& ctx, int resolution) const {
    if (resolution < 8 || resolution > 256) throw ApiError(400, "bad_request", "resolution must be in [8, 256]");
    const RoomPolygon& room = sampler.pool.room;
    const Pose2D& user = sampler.pool.user;
    const ProxemicsNetwork& model = personalized ? *personalized : ctx.base;
    Heatmap h;
    h.resolution = resolution;
    h.min_corner = room.min_corner();
    h.max_corner = room.max_corner();
    h.model = personalized ? "personalized" : "base";
    h.values.resize(static_cast<std::size_t>(resolution) * resolution);
    const Point2 cell = (h.max_corner - h.min_corner) / resolution;
    for (int row = 0; row < resolution; ++row) {
      for (int col = 0; col < resolution; ++col) {
        const Point2 p = h.min_corner + Point2((col + 0.5) * cell.x(), (row + 0.5) * cell.y());
        if (!room.contains(p)) continue;
        const Point2 to_user = user.position() - p;
        if (to_user.norm() < kCoincidentEps) continue;
        const Pose2D robot(p.x(), p.y(), std::atan2(to_user.y(), to_user.x()));
        const double v = predict_score(model, extract_features(room, user, robot), ctx.cfg.smooth);
        h.values[static_cast<std::size_t>(row) * resolution + col] = std::clamp(v, 0.0, 100.0);
      }
    }
    return h;
  }

  std::string rng_state() const {
    std::ostringstream out;
    out << sampler.rng;
    return out.str();
  }

  json state() const {
    json approaches_j = json::array();
    for (const auto& r : approaches) {
      approaches_j.push_back(json{{"approach_id", r.approach_id},
                                  {"angle", r.angle},
                                  {"start_position", point_json(r.start_position)},
                                  {"approach_length", r.approach_length},
                                  {"dialogue_index", r.dialogue_index},
                                  {"stop_distance", r.stop_distance ? json(*r.stop_distance) : json(nullptr)},
                                  {"answer_index", r.answer_index ? json(*r.answer_index) : json(nullptr)}});
    }
    json labeled = json::array();
    for (const auto& e : sampler.labeled) {
      json f = json::array();
      const FeatureArray a = e.features.to_array();
      for (int i = 0; i < kFeatureCount; ++i) f.push_back(a(i));
      labeled.push_back(json{{"features", f}, {"discomfort", e.discomfort}});
    }
    std::string flags;
    for (const auto& c : sampler.pool.candidates) flags.push_back(c.labeled ? '1' : '0');
    json j{{"session_id", id},
           {"request", json::parse(create_request_to_json(req))},
           {"approaches", approaches_j},
           {"queue", std::vector<double>(queue.begin(), queue.end())},
           {"dialogue_cursor", dialogue_cursor},
           {"round", sampler.round},
           {"retrain_count", sampler.retrain_count},
           {"labeled", labeled},
           {"candidate_flags", flags},
           {"rng", rng_state()}};
    if (sampler.discriminator) {
      const auto& d = *sampler.discriminator;
      std::vector<double> w(d.weights.data(), d.weights.data() + d.weights.size());
      j["discriminator"] = json{{"weights", w}, {"bias", d.bias}, {"iterations", d.iterations}};
    }
    if (personalized) j["personalized"] = json::parse(model_to_json(*personalized));
    return j;
  }
};

namespace {

std::int64_t wall_clock_ms() {
  using namespace std::chrono;
  return duration_cast<milliseconds>(system_clock::now().time_since_epoch()).count();
}

std::shared_ptr<Session> build_session(const Context& ctx, const std::string& id, const CreateRequest& req,
                                       std::int64_t now) {
  if (!req.room.contains(req.user_pose.position())) {
    throw ApiError(400, "bad_request", "user pose lies outside the room");
  }
  std::vector<FeatureArray> domain;
  if (req.strategy == atl::Strategy::atl) {
    domain = ctx.base.meta.domain_sample;
    if (domain.empty()) {
      throw ApiError(400, "bad_request", "atl strategy unavailable: the base model carries no training-domain sample");
    }
  }
  atl::CandidatePool pool = [&] {
    try {
      return atl::generate_pool(req.room, req.user_pose, ctx.cfg.grid);
    } catch (const OutsideRoom& e) {
      throw ApiError(400, "bad_request", e.what());
    }
  }();
  if (pool.candidates.empty()) throw ApiError(400, "bad_request", "no approach candidate lies inside the room");
  const std::size_t n_candidates = pool.candidates.size(), dropped = pool.dropped;

  auto sampler = atl::init_sampler(std::move(pool), std::move(domain), req.strategy, req.seed, ctx.cfg.sampler);
  CreateRequest stored = req;
  stored.session_id = id;
  auto s = std::make_shared<Session>(id, stored, std::move(sampler));
  s->append(kCreated, now, json::parse(create_request_to_json(stored)));
  s->append(kPool, now, json{{"candidates", n_candidates}, {"dropped", dropped}, {"angles", ctx.cfg.grid.angles}});
  if (req.strategy == atl::Strategy::atl) s->log_retrain(now);
  return s;
}

bool same_event(const Event& a, const Event& b) {
  return a.seq == b.seq && a.type == b.type && json::parse(a.payload) == json::parse(b.payload);
}

}  // namespace

SessionManager::SessionManager(std::shared_ptr<const ProxemicsNetwork> base, std::vector<DialogueItem> dialogue,
                               ServiceConfig cfg)
    : base_(std::move(base)), dialogue_(std::move(dialogue)), cfg_(std::move(cfg)), clock_(wall_clock_ms) {
  if (!base_) throw std::invalid_argument("SessionManager: base model is required");
  if (dialogue_.empty()) throw std::invalid_argument("SessionManager: dialogue list is empty");
  if (!(cfg_.speed_mps > 0.0)) throw std::invalid_argument("SessionManager: speed_mps must be positive");
  if (cfg_.stop_latency_s < 0.0) throw std::invalid_argument("SessionManager: stop_latency_s must be >= 0");
  if (cfg_.holdout_fraction < 0.0 || cfg_.holdout_fraction >= 1.0) {
    throw std::invalid_argument("SessionManager: holdout_fraction must be in [0, 1)");
  }
  cfg_.grid.validate();
  if (!cfg_.store.empty()) std::filesystem::create_directories(cfg_.store);
}

SessionManager::~SessionManager() = default;

std::shared_ptr<Session> SessionManager::find(const std::string& id) const {
  std::shared_lock lock(map_mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ApiError(404, "not_found", "unknown session '" + id + "'");
  return it->second;
}

void SessionManager::insert(const std::shared_ptr<Session>& s) {
  std::unique_lock lock(map_mutex_);
  if (sessions_.count(s->id)) throw ApiError(409, "conflict", "session '" + s->id + "' already exists");
  sessions_.emplace(s->id, s);
}

std::string SessionManager::create(const CreateRequest& req) {
  const Context ctx{*base_, dialogue_, cfg_};
  std::string id;
  {
    std::shared_lock lock(map_mutex_);
    if (req.session_id) {
      if (!valid_id(*req.session_id)) {
        throw ApiError(400, "bad_request", "session_id must be 1-64 characters of [A-Za-z0-9_-]");
      }
      if (sessions_.count(*req.session_id)) {
        throw ApiError(409, "conflict", "session '" + *req.session_id + "' already exists");
      }
      id = *req.session_id;
    } else {
      for (int attempt = 0; id.empty() || sessions_.count(id); ++attempt) id = generate_id(req.seed, attempt);
    }
  }
  auto s = build_session(ctx, id, req, clock_());
  if (!cfg_.store.empty()) {
    s->store = cfg_.store;
    if (std::filesystem::exists(s->log_path())) throw ApiError(409, "conflict", "session '" + id + "' already exists");
    std::string text;
    for (const auto& e : s->log) text += event_to_json_line(e) + "\n";
    durable_write(s->log_path(), text, true);
  }
  insert(s);
  return id;
}

NextResponse SessionManager::next(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return s->next({*base_, dialogue_, cfg_}, clock_());
}

StopResponse SessionManager::stop(const std::string& id, const StopRequest& req) {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return s->stop({*base_, dialogue_, cfg_}, req, clock_());
}

FinetuneResponse SessionManager::finetune(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return s->finetune({*base_, dialogue_, cfg_}, clock_());
}

Heatmap SessionManager::heatmap(const std::string& id, int resolution) {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return s->heatmap({*base_, dialogue_, cfg_}, resolution);
}

std::string SessionManager::export_log(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  std::string out;
  for (const auto& e : s->log) out += event_to_json_line(e) + "\n";
  return out;
}

std::shared_ptr<Session> SessionManager::replay(const std::vector<Event>& events, bool strict) const {
  const Context ctx{*base_, dialogue_, cfg_};
  CreateRequest req;
  try {
    req = create_request_from_json(events.front().payload);
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("session_created: ") + e.what());
  }
  if (!req.session_id || !valid_id(*req.session_id)) throw ParseError("session_created: missing or invalid session_id");
  auto s = build_session(ctx, *req.session_id, req, events.front().time_ms);

  for (std::size_t i = 1; i < events.size(); ++i) {
    const Event& e = events[i];
    if (!is_request_event(e.type)) continue;
    const json p = json::parse(e.payload);
    try {
      if (e.type == kServed) {
        const auto r = s->next(ctx, e.time_ms);
        if (r.approach_id != p.at("approach_id").get<int>() || r.angle != p.at("angle").get<double>()) {
          throw ParseError("replay diverged at seq " + std::to_string(e.seq) + ": served a different approach");
        }
      } else if (e.type == kStopped) {
        s->stop(ctx,
                StopRequest{p.at("approach_id").get<int>(), p.at("stop_distance").get<double>(),
                            p.at("answer_index").get<int>()},
                e.time_ms);
      } else if (e.type == kFinetuned) {
        s->finetune(ctx, e.time_ms);
      } else {
        throw ParseError("replay: unexpected second session_created at seq " + std::to_string(e.seq));
      }
    } catch (const ApiError& err) {
      throw ParseError("replay rejected event seq " + std::to_string(e.seq) + ": " + err.what());
    } catch (const json::exception& err) {
      throw ParseError("replay: malformed payload at seq " + std::to_string(e.seq) + ": " + err.what());
    }
  }

  // Regenerated request events must agree with the log; derived events must
  // agree too unless the log ends mid-request (crash recovery).
  std::vector<const Event*> want, got;
  for (const auto& e : events) {
    if (strict || is_request_event(e.type)) want.push_back(&e);
  }
  for (const auto& e : s->log) {
    if (strict || is_request_event(e.type)) got.push_back(&e);
  }
  if (want.size() != got.size()) {
    throw ParseError("replay produced " + std::to_string(got.size()) + " events, log has " + std::to_string(want.size()));
  }
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (want[i]->type != got[i]->type || json::parse(want[i]->payload) != json::parse(got[i]->payload) ||
        (strict && !same_event(*want[i], *got[i]))) {
      throw ParseError("replay diverged at event seq " + std::to_string(want[i]->seq) + " (" + want[i]->type + ")");
    }
  }
  return s;
}

std::string SessionManager::import_log(const std::string& jsonl) {
  std::shared_ptr<Session> s;
  try {
    s = replay(parse_event_log(jsonl), true);
  } catch (const ParseError& e) {
    throw ApiError(400, "bad_request", e.what());
  }
  {
    std::shared_lock lock(map_mutex_);
    if (sessions_.count(s->id)) throw ApiError(409, "conflict", "session '" + s->id + "' already exists");
  }
  if (!cfg_.store.empty()) {
    s->store = cfg_.store;
    if (std::filesystem::exists(s->log_path())) throw ApiError(409, "conflict", "session '" + s->id + "' already exists");
    std::string text;
    for (const auto& e : s->log) text += event_to_json_line(e) + "\n";
    durable_write(s->log_path(), text, true);
    if (s->personalized) save_model(*s->personalized, cfg_.store / s->model_ref());
  }
  insert(s);
  return s->id;
}

std::size_t SessionManager::load_store() {
  if (cfg_.store.empty()) return 0;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(cfg_.store)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("session-", 0) == 0 && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::size_t loaded = 0;
  for (const auto& path : files) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    const auto events = parse_event_log(ss.str());
    auto s = replay(events, false);
    if (path.filename().string() != "session-" + s->id + ".jsonl") {
      throw ParseError(path.string() + ": file name does not match session id " + s->id);
    }
    s->store = cfg_.store;
    bool same = events.size() == s->log.size();
    for (std::size_t i = 0; same && i < events.size(); ++i) same = same_event(events[i], s->log[i]);
    if (!same) {
      std::string text;
      for (const auto& e : s->log) text += event_to_json_line(e) + "\n";
      durable_write(s->log_path(), text, true);
    }
    if (s->personalized) save_model(*s->personalized, cfg_.store / s->model_ref());
    insert(s);
    ++loaded;
  }
  return loaded;
}

std::string SessionManager::state_digest(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  return fnv1a_hex(s->state().dump());
}

std::string SessionManager::state_json(const std::string& id) {
  auto s = find(id);
  std::lock_guard lock(s->mu);
  const json st = s->state();
  json out{{"session_id", s->id},
           {"strategy", atl::to_string(s->req.strategy)},
           {"seed", s->req.seed},
           {"round", s->sampler.round},
           {"approaches", st["approaches"]},
           {"labeled_points", s->sampler.labeled.size()},
           {"events", s->log.size()},
           {"personalized", s->personalized.has_value()},
           {"digest", fnv1a_hex(st.dump())}};
  return out.dump();
}

std::vector<std::string> SessionManager::session_ids() const {
  std::shared_lock lock(map_mutex_);
  std::vector<std::string> ids;
  for (const auto& [id, _] : sessions_) ids.push_back(id);
  return ids;
}

}  // namespace proxilab::service
