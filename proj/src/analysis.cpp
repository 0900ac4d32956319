#include "proxilab/analysis.hpp"

#include "proxilab/errors.hpp"
#include "proxilab/rng.hpp"
#include "proxilab/session.hpp"
#include "proxilab/stats/gpr.hpp"
#include "proxilab/stats/hypothesis.hpp"
#include "proxilab/stats/iforest.hpp"
#include "proxilab/stats/kde.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace proxilab::analysis {

using nlohmann::json;

SessionStops summarize_session_log(const std::string& jsonl) {
  const auto events = service::parse_event_log(jsonl);
  const json created = json::parse(events.front().payload);
  SessionStops s;
  s.session_id = created.at("session_id").get<std::string>();
  s.participant = created.value("participant", s.session_id);
  s.condition = created.value("condition", std::string("ar"));
  s.strategy = created.value("strategy", std::string("atl"));
  std::map<int, double> served;
  for (const auto& e : events) {
    const json p = json::parse(e.payload);
    if (e.type == "approach_served") {
      served[p.at("approach_id").get<int>()] = p.at("angle").get<double>();
    } else if (e.type == "stop_recorded") {
      const int id = p.at("approach_id").get<int>();
      auto it = served.find(id);
      if (it == served.end()) throw ParseError("stop for unknown approach " + std::to_string(id));
      s.angles.push_back(it->second);
      s.distances.push_back(p.value("recorded_distance", p.at("stop_distance").get<double>()));
    } else if (e.type == "finetuned") {
      s.pre_mae = p.at("pre_mae").get<double>();
      s.post_mae = p.at("post_mae").get<double>();
    }
  }
  return s;
}

std::vector<SessionStops> load_session_dir(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("session-", 0) == 0 && entry.path().extension() == ".jsonl") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<SessionStops> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    if (!in) throw IoError("cannot read " + f.string());
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      out.push_back(summarize_session_log(ss.str()));
    } catch (const std::exception& e) {
      throw ParseError(f.string() + ": " + e.what());
    }
  }
  return out;
}

void AnalysisConfig::validate() const {
  if (!(bandwidth > 0.0)) throw std::invalid_argument("analysis: bandwidth must be positive");
  if (grid_points < 2) throw std::invalid_argument("analysis: grid_points must be >= 2");
  if (!(grid_max > 0.0)) throw std::invalid_argument("analysis: grid_max must be positive");
  if (holdout_fraction <= 0.0 || holdout_fraction >= 1.0) {
    throw std::invalid_argument("analysis: holdout_fraction must be in (0, 1)");
  }
}

namespace {

std::uint64_t text_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix(h);
}

GroupAnalysis analyze_group(const std::string& participant, const std::string& condition,
                            std::vector<double> angles, std::vector<double> distances, const AnalysisConfig& cfg,
                            const std::vector<double>& grid) {
  GroupAnalysis g;
  g.participant = participant;
  g.condition = condition;
  g.angles = std::move(angles);
  g.distances = std::move(distances);
  const auto n = g.distances.size();
  g.inlier.assign(n, true);
  g.scores.assign(n, 0.0);
  if (n >= 2) {
    Eigen::MatrixXd pts(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i) {
      pts(static_cast<Eigen::Index>(i), 0) = g.angles[i];
      pts(static_cast<Eigen::Index>(i), 1) = g.distances[i];
    }
    stats::IsolationForestConfig fc;
    fc.seed = cfg.forest_seed ^ text_hash(participant + "/" + condition);
    const auto res = stats::isolation_forest(stats::standardize_columns(pts), fc);
    g.inlier = res.inlier;
    g.scores.assign(res.scores.data(), res.scores.data() + res.scores.size());
  }
  double raw = 0.0, clean = 0.0;
  std::size_t kept = 0;
  std::map<double, std::vector<double>> by_angle, all_by_angle;
  for (std::size_t i = 0; i < n; ++i) {
    raw += g.distances[i];
    all_by_angle[g.angles[i]].push_back(g.distances[i]);
    if (!g.inlier[i]) continue;
    clean += g.distances[i];
    ++kept;
    by_angle[g.angles[i]].push_back(g.distances[i]);
  }
  g.mean_raw = n ? raw / static_cast<double>(n) : std::nan("");
  g.mean_cleaned = kept ? clean / static_cast<double>(kept) : std::nan("");
  for (const auto& [angle, values] : all_by_angle) {
    auto it = by_angle.find(angle);
    const auto& use = it != by_angle.end() ? it->second : values;
    g.mode_angles.push_back(angle);
    g.modes.push_back(stats::kde_mode(stats::KdeModel::from_values(use, cfg.bandwidth), grid));
  }
  return g;
}

simlab::Comparison compare(const std::string& a_name, const std::vector<double>& a, const std::string& b_name,
                           const std::vector<double>& b) {
  simlab::Comparison c;
  c.a = a_name;
  c.b = b_name;
  c.mean_a = stats::mean(a);
  c.std_a = stats::sample_std(a);
  c.mean_b = stats::mean(b);
  c.std_b = stats::sample_std(b);
  c.test = stats::paired_t_lower(a, b);
  return c;
}

}  // namespace

AnalysisReport analyze_sessions(std::vector<SessionStops> sessions, const AnalysisConfig& cfg) {
  cfg.validate();
  AnalysisReport rep;
  rep.config = cfg;
  rep.sessions = std::move(sessions);
  const std::vector<double> grid = stats::linspace(0.0, cfg.grid_max, cfg.grid_points);

  std::map<std::pair<std::string, std::string>, std::pair<std::vector<double>, std::vector<double>>> pooled;
  for (const auto& s : rep.sessions) {
    auto& [a, d] = pooled[{s.participant, s.condition}];
    a.insert(a.end(), s.angles.begin(), s.angles.end());
    d.insert(d.end(), s.distances.begin(), s.distances.end());
  }
  for (auto& [key, data] : pooled) {
    if (data.second.empty()) continue;
    rep.groups.push_back(analyze_group(key.first, key.second, data.first, data.second, cfg, grid));
  }

  // Virtual = every non-physical condition of a participant.
  std::map<std::string, const GroupAnalysis*> physical, virt;
  for (const auto& g : rep.groups) {
    if (g.condition == cfg.physical_condition) {
      physical[g.participant] = &g;
    } else if (!virt.count(g.participant)) {
      virt[g.participant] = &g;
    }
  }
  std::vector<std::string> paired;
  for (const auto& [p, g] : physical) {
    if (virt.count(p)) paired.push_back(p);
  }
  for (const auto& p : paired) {
    rep.abs_mean_diffs.push_back({p, {std::abs(virt[p]->mean_raw - physical[p]->mean_raw),
                                      std::abs(virt[p]->mean_cleaned - physical[p]->mean_cleaned)}});
  }

  if (paired.size() < 2) {
    rep.gpr_note = "needs at least two participants with both a virtual and a '" + cfg.physical_condition +
                   "' condition";
  } else {
    std::vector<std::string> order = paired;
    std::sort(order.begin(), order.end(), [](const std::string& a, const std::string& b) {
      const auto ha = text_hash(a), hb = text_hash(b);
      return ha != hb ? ha < hb : a < b;
    });
    auto n_hold = static_cast<std::size_t>(std::ceil(cfg.holdout_fraction * static_cast<double>(order.size())));
    n_hold = std::clamp<std::size_t>(n_hold, 1, order.size() - 1);
    const std::set<std::string> held(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_hold));

    GprSummary gs;
    for (const auto& p : paired) {
      const auto* v = virt[p];
      const auto* ph = physical[p];
      for (std::size_t i = 0; i < v->mode_angles.size(); ++i) {
        auto it = std::find(ph->mode_angles.begin(), ph->mode_angles.end(), v->mode_angles[i]);
        if (it == ph->mode_angles.end()) continue;
        gs.pairs.push_back({p, v->mode_angles[i], v->modes[i],
                            ph->modes[static_cast<std::size_t>(it - ph->mode_angles.begin())], held.count(p) > 0, {}});
      }
    }
    std::vector<double> xs, ys;
    for (const auto& m : gs.pairs) {
      if (m.held_out) continue;
      xs.push_back(m.virtual_mode);
      ys.push_back(m.physical_mode);
    }
    std::size_t n_test = 0;
    for (const auto& m : gs.pairs) n_test += m.held_out ? 1 : 0;
    if (xs.empty() || n_test == 0) {
      rep.gpr_note = "no shared approach angles between conditions";
    } else {
      stats::GprConfig gc;
      gc.noise_variance = cfg.gpr_noise;
      const auto gpr = stats::gpr_fit(Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size())),
                                      Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size())), gc);
      double sq = 0.0;
      for (std::size_t i = 0; i < xs.size(); ++i) sq += std::pow(gpr.predict_mean(xs[i]) - ys[i], 2);
      gs.train_rmse = std::sqrt(sq / static_cast<double>(xs.size()));
      double ge = 0.0, ne = 0.0;
      for (auto& m : gs.pairs) {
        if (!m.held_out) continue;
        m.predicted = gpr.predict_mean(m.virtual_mode);
        ge += std::abs(*m.predicted - m.physical_mode);
        ne += std::abs(m.virtual_mode - m.physical_mode);
      }
      gs.heldout_gpr_error = ge / static_cast<double>(n_test);
      gs.heldout_naive_error = ne / static_cast<double>(n_test);
      rep.gpr = std::move(gs);
    }
  }

  // Per-participant fine-tune comparison over the virtual sessions. The
  // not-fine-tuned error is the RS session's pre-fine-tune MAE.
  struct Row {
    std::optional<double> atl, rs, base;
  };
  std::map<std::string, Row> rows;
  for (const auto& s : rep.sessions) {
    if (!s.post_mae || s.condition == cfg.physical_condition) continue;
    auto& r = rows[s.participant];
    if (s.strategy == "atl") {
      r.atl = s.post_mae;
      if (!r.base) r.base = s.pre_mae;
    } else {
      r.rs = s.post_mae;
      r.base = s.pre_mae;
    }
  }
  std::vector<double> atl, rs, base;
  for (const auto& [p, r] : rows) {
    if (!r.atl || !r.rs || !r.base) continue;
    atl.push_back(*r.atl);
    rs.push_back(*r.rs);
    base.push_back(*r.base);
  }
  if (atl.size() < 2) {
    rep.test_matrix_note = "needs at least two participants with fine-tuned ATL and RS sessions";
  } else {
    rep.test_matrix = {compare("RS", rs, "ATL", atl), compare("RS", rs, "notFT", base),
                       compare("ATL", atl, "notFT", base), compare("ATL", atl, "RS", rs)};
  }
  return rep;
}

std::string analysis_to_json(const AnalysisReport& rep) {
  json groups = json::array();
  for (const auto& g : rep.groups) {
    groups.push_back({{"participant", g.participant},
                      {"condition", g.condition},
                      {"angles", g.angles},
                      {"distances", g.distances},
                      {"outlier_scores", g.scores},
                      {"inlier", g.inlier},
                      {"mode_angles", g.mode_angles},
                      {"kde_modes", g.modes},
                      {"mean_raw", g.mean_raw},
                      {"mean_cleaned", g.mean_cleaned}});
  }
  json diffs = json::array();
  for (const auto& [p, d] : rep.abs_mean_diffs) {
    diffs.push_back({{"participant", p}, {"abs_mean_diff_raw", d.first}, {"abs_mean_diff_cleaned", d.second}});
  }
  json gpr = nullptr;
  if (rep.gpr) {
    json pairs = json::array();
    for (const auto& m : rep.gpr->pairs) {
      json jm{{"participant", m.participant},
              {"angle", m.angle},
              {"virtual_mode", m.virtual_mode},
              {"physical_mode", m.physical_mode},
              {"held_out", m.held_out}};
      if (m.predicted) jm["predicted_physical"] = *m.predicted;
      pairs.push_back(std::move(jm));
    }
    gpr = {{"pairs", pairs},
           {"train_rmse", rep.gpr->train_rmse},
           {"heldout_gpr_error", rep.gpr->heldout_gpr_error},
           {"heldout_naive_error", rep.gpr->heldout_naive_error}};
  }
  json matrix = json::array();
  for (const auto& c : rep.test_matrix) {
    matrix.push_back({{"a", c.a},
                      {"b", c.b},
                      {"mean_a", c.mean_a},
                      {"std_a", c.std_a},
                      {"mean_b", c.mean_b},
                      {"std_b", c.std_b},
                      {"t", c.test.statistic},
                      {"p_value", c.test.p_value},
                      {"df", c.test.df.value_or(0)}});
  }
  json j{{"kind", "session_analysis"},
         {"config",
          {{"bandwidth", rep.config.bandwidth},
           {"grid_points", rep.config.grid_points},
           {"grid_max", rep.config.grid_max},
           {"gpr_noise", rep.config.gpr_noise},
           {"holdout_fraction", rep.config.holdout_fraction},
           {"physical_condition", rep.config.physical_condition}}},
         {"sessions", rep.sessions.size()},
         {"groups", groups},
         {"abs_mean_diffs", diffs},
         {"gpr", gpr},
         {"test_matrix", matrix}};
  if (!rep.gpr_note.empty()) j["gpr_note"] = rep.gpr_note;
  if (!rep.test_matrix_note.empty()) j["test_matrix_note"] = rep.test_matrix_note;
  return j.dump(2);
}

}  // namespace proxilab::analysis
