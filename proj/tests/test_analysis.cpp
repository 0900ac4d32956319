#include "proxilab/analysis.hpp"
#include "proxilab/session.hpp"

#include "support.hpp"

#include "doctest.h"
#include "json.hpp"

#include <fstream>
#include <numbers>

using namespace proxilab;
using namespace proxilab::analysis;

namespace {

/// Runs one full service session for a synthetic participant and returns its log.
std::string session_log(service::SessionManager& mgr, const std::string& id, const std::string& participant,
                        const std::string& condition, double offset, atl::Strategy strategy, std::uint64_t seed) {
  service::CreateRequest r;
  r.session_id = id;
  r.room = make_rectangle(-2.5, -2.5, 2.5, 2.5);
  r.user_pose = Pose2D(0.0, 0.0, std::numbers::pi / 2);
  r.strategy = strategy;
  r.seed = seed;
  r.participant = participant;
  r.condition = condition;
  mgr.create(r);
  simlab::SyntheticUser u;
  u.base_distance = 0.9 + offset;
  u.angular_amplitude = 0.2;
  u.noise_sigma = 0.04;
  u.seed = seed;
  for (int i = 0; i < 9; ++i) {
    const auto n = mgr.next(id);
    const double d = std::min(simlab::preferred_distance(u, n.angle, i), n.approach_length);
    mgr.stop(id, service::StopRequest{n.approach_id, d, 0});
  }
  mgr.finetune(id);
  return mgr.export_log(id);
}

}  // namespace

TEST_CASE("session log summary") {
  service::SessionManager mgr(testing::fixture_model(), testing::two_items());
  const auto log = session_log(mgr, "p1-ar", "p1", "ar", 0.0, atl::Strategy::atl, 1);
  const auto s = summarize_session_log(log);
  CHECK(s.session_id == "p1-ar");
  CHECK(s.participant == "p1");
  CHECK(s.condition == "ar");
  CHECK(s.strategy == "atl");
  CHECK(s.angles.size() == 9);
  CHECK(s.distances.size() == 9);
  REQUIRE(s.pre_mae.has_value());
  REQUIRE(s.post_mae.has_value());
  CHECK_THROWS(summarize_session_log("nope"));
}

TEST_CASE("participant defaults to the session id") {
  service::SessionManager mgr(testing::fixture_model(), testing::two_items());
  service::CreateRequest r;
  r.session_id = "solo";
  r.room = make_rectangle(-2, -2, 2, 2);
  r.strategy = atl::Strategy::random;
  mgr.create(r);
  const auto s = summarize_session_log(mgr.export_log("solo"));
  CHECK(s.participant == "solo");
  CHECK(s.angles.empty());
  CHECK_FALSE(s.pre_mae.has_value());
}

TEST_CASE("analysis over a directory of sessions") {
  const auto dir = testing::scratch_dir("analysis");
  service::ServiceConfig cfg;
  cfg.store = dir;
  service::SessionManager mgr(testing::fixture_model(), testing::two_items(), cfg);
  for (int p = 0; p < 4; ++p) {
    const std::string name = "p" + std::to_string(p);
    const std::uint64_t seed = 10 + p;
    session_log(mgr, name + "-ar-atl", name, "ar", 0.0, atl::Strategy::atl, seed);
    session_log(mgr, name + "-ar-rs", name, "ar", 0.0, atl::Strategy::random, seed + 100);
    session_log(mgr, name + "-ph", name, "physical", 0.3, atl::Strategy::random, seed + 200);
  }
  const auto sessions = load_session_dir(dir);
  REQUIRE(sessions.size() == 12);
  CHECK(std::is_sorted(sessions.begin(), sessions.end(),
                       [](const SessionStops& a, const SessionStops& b) { return a.session_id < b.session_id; }));

  const auto report = analyze_sessions(sessions);
  CHECK(report.groups.size() == 8);
  for (const auto& g : report.groups) {
    CHECK(g.inlier.size() == g.distances.size());
    CHECK(g.modes.size() == g.mode_angles.size());
    for (double m : g.modes) {
      CHECK(m >= 0.0);
      CHECK(m <= report.config.grid_max);
    }
  }
  REQUIRE(report.abs_mean_diffs.size() == 4);
  for (const auto& [who, diffs] : report.abs_mean_diffs) CHECK(diffs.first > 0.1);
  CHECK(report.gpr.has_value());
  CHECK(report.test_matrix.size() == 4);

  const auto j = nlohmann::json::parse(analysis_to_json(report));
  CHECK(j.contains("groups"));
  CHECK(j.contains("test_matrix"));
}

TEST_CASE("analysis notes what it cannot compute") {
  service::SessionManager mgr(testing::fixture_model(), testing::two_items());
  std::vector<SessionStops> only_ar{
      summarize_session_log(session_log(mgr, "a", "a", "ar", 0.0, atl::Strategy::atl, 1))};
  const auto report = analyze_sessions(only_ar);
  CHECK_FALSE(report.gpr.has_value());
  CHECK_FALSE(report.gpr_note.empty());
  CHECK(report.abs_mean_diffs.empty());
  CHECK(report.test_matrix.empty());
  CHECK_FALSE(report.test_matrix_note.empty());
  AnalysisConfig bad;
  bad.bandwidth = 0.0;
  CHECK_THROWS_AS(analyze_sessions(only_ar, bad), std::invalid_argument);
}
