#include "proxilab/socnav.hpp"

#include "proxilab/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace proxilab {

using nlohmann::json;

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

std::string id_string(const json& j) {
  if (j.is_string()) return j.get<std::string>();
  if (j.is_number_integer()) return std::to_string(j.get<long long>());
  if (j.is_number()) return j.dump();
  throw ParseError("identifier must be a string or number");
}

SocNavEntity parse_entity(const json& j) {
  return {id_string(j.at("id")),
          Pose2D(j.at("xPos").get<double>(), j.at("yPos").get<double>(),
                 j.value("orientation", 0.0) * kDegToRad)};
}

SocNavScenario parse_record(const json& j) {
  std::vector<Point2> pts;
  for (const auto& p : j.at("room")) pts.emplace_back(p.at(0).get<double>(), p.at(1).get<double>());

  // Scenes are robot-centric: the robot sits at the origin facing +y unless
  // the record says otherwise.
  Pose2D robot(0.0, 0.0, std::numbers::pi / 2);
  std::string robot_id = "robot";
  if (j.contains("robot")) {
    const auto& r = j.at("robot");
    if (r.contains("id")) robot_id = id_string(r.at("id"));
    if (r.contains("xPos")) {
      robot = Pose2D(r.at("xPos").get<double>(), r.at("yPos").get<double>(),
                     r.value("orientation", 90.0) * kDegToRad);
    }
  }

  const json& score_j = j.at("score");
  if (!score_j.is_number()) throw ParseError("score must be numeric");
  const double score_d = score_j.get<double>();
  if (!(score_d >= 0.0 && score_d <= 100.0)) throw ParseError("score outside [0, 100]");

  SocNavScenario s{id_string(j.at("identifier")), robot_id, RoomPolygon(std::move(pts)), robot, {}, {}, {},
                   static_cast<int>(std::lround(score_d))};
  for (const auto& h : j.value("humans", json::array())) s.humans.push_back(parse_entity(h));
  for (const auto& o : j.value("objects", json::array())) s.objects.push_back(parse_entity(o));
  for (const auto& l : j.value("links", json::array())) {
    s.interactions.emplace_back(id_string(l.at(0)), id_string(l.at(1)));
  }
  return s;
}

SocNavScenario parse_indexed(const json& j, std::size_t index) {
  try {
    return parse_record(j);
  } catch (const std::exception& e) {
    throw ParseError("record " + std::to_string(index) + ": " + e.what());
  }
}

}  // namespace

const char* to_string(ExampleSource s) {
  switch (s) {
    case ExampleSource::socnav:
      return "socnav";
    case ExampleSource::session:
      return "session";
    case ExampleSource::synthetic:
      return "synthetic";
  }
  return "socnav";
}

ExampleSource source_from_string(const std::string& s) {
  if (s == "socnav") return ExampleSource::socnav;
  if (s == "session") return ExampleSource::session;
  if (s == "synthetic") return ExampleSource::synthetic;
  throw ParseError("unknown example source '" + s + "'");
}

std::vector<SocNavScenario> parse_dataset_text(const std::string& text) {
  std::vector<SocNavScenario> out;
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return out;

  if (text[first] == '[') {
    json arr;
    try {
      arr = json::parse(text);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed dataset array: ") + e.what());
    }
    out.reserve(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) out.push_back(parse_indexed(arr[i], i));
    return out;
  }

  std::istringstream in(text);
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError("record " + std::to_string(index) + ": " + e.what());
    }
    out.push_back(parse_indexed(j, index));
    ++index;
  }
  return out;
}

std::vector<SocNavScenario> parse_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open dataset file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset_text(buf.str());
}

std::string scenarios_to_json(const std::vector<SocNavScenario>& scenarios) {
  auto entity = [](const SocNavEntity& e) {
    return json{{"id", e.id}, {"xPos", e.pose.x}, {"yPos", e.pose.y}, {"orientation", e.pose.heading / kDegToRad}};
  };
  json arr = json::array();
  for (const auto& s : scenarios) {
    json room = json::array();
    for (const auto& v : s.walls.vertices()) room.push_back({v.x(), v.y()});
    json humans = json::array(), objects = json::array(), links = json::array();
    for (const auto& h : s.humans) humans.push_back(entity(h));
    for (const auto& o : s.objects) objects.push_back(entity(o));
    for (const auto& [a, b] : s.interactions) links.push_back({a, b, "interact"});
    arr.push_back({{"identifier", s.scenario_id},
                   {"score", s.score},
                   {"robot", {{"id", s.robot_id}, {"xPos", s.robot.x}, {"yPos", s.robot.y},
                              {"orientation", s.robot.heading / kDegToRad}}},
                   {"room", room},
                   {"humans", humans},
                   {"objects", objects},
                   {"links", links}});
  }
  return arr.dump();
}

void write_dataset(const std::filesystem::path& path, const std::vector<SocNavScenario>& scenarios) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write dataset file " + path.string());
  out << scenarios_to_json(scenarios) << '\n';
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<SocNavScenario> filter_single_human(const std::vector<SocNavScenario>& scenarios) {
  std::vector<SocNavScenario> out;
  for (const auto& s : scenarios) {
    if (s.humans.size() != 1) continue;
    const std::string& hid = s.humans.front().id;
    const bool interacting = std::any_of(s.interactions.begin(), s.interactions.end(),
                                         [&](const auto& link) { return link.first == hid || link.second == hid; });
    if (!interacting) out.push_back(s);
  }
  return out;
}

LabeledExample to_labeled_example(const SocNavScenario& scenario) {
  if (scenario.humans.size() != 1) throw std::invalid_argument("scenario must contain exactly one human");
  return {extract_features(scenario.walls, scenario.humans.front().pose, scenario.robot),
          100.0 - static_cast<double>(scenario.score), ExampleSource::socnav};
}

LabelingResult to_labeled_examples(const std::vector<SocNavScenario>& scenarios) {
  LabelingResult r;
  for (const auto& s : scenarios) {
    try {
      r.examples.push_back(to_labeled_example(s));
    } catch (const OutsideRoom& e) {
      r.warnings.push_back("skipped scenario " + s.scenario_id + ": " + e.what());
    } catch (const DegenerateScenario& e) {
      r.warnings.push_back("skipped scenario " + s.scenario_id + ": " + e.what());
    }
  }
  return r;
}

SplitRatios parse_ratios(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      parts.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw std::invalid_argument("bad ratio '" + item + "'");
    }
  }
  if (parts.size() != 3) throw std::invalid_argument("ratios need three comma-separated values");
  return {parts[0], parts[1], parts[2]};
}

DatasetSplit split(const std::vector<LabeledExample>& examples, SplitRatios ratios, std::uint64_t seed) {
  const double total = ratios.train + ratios.validation + ratios.test;
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 || std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be non-negative and sum to 1");
  }
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n = static_cast<double>(examples.size());
  auto n_train = static_cast<std::size_t>(std::llround(n * ratios.train));
  auto n_val = static_cast<std::size_t>(std::llround(n * ratios.validation));
  n_train = std::min(n_train, examples.size());
  n_val = std::min(n_val, examples.size() - n_train);

  DatasetSplit out;
  out.seed = seed;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& e = examples[order[i]];
    if (i < n_train) {
      out.train.push_back(e);
    } else if (i < n_train + n_val) {
      out.validation.push_back(e);
    } else {
      out.test.push_back(e);
    }
  }
  return out;
}

std::string example_to_json_line(const LabeledExample& e, const std::optional<std::string>& split) {
  const FeatureArray f = e.features.to_array();
  json j;
  j["features"] = std::vector<double>(f.data(), f.data() + kFeatureCount);
  j["discomfort"] = e.discomfort;
  j["source"] = to_string(e.source);
  if (split) j["split"] = *split;
  return j.dump();
}

std::vector<TaggedExample> read_examples_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open examples file " + path.string());
  std::vector<TaggedExample> out;
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      const auto feats = j.at("features").get<std::vector<double>>();
      TaggedExample t{{FeatureVector::from_span(feats), j.at("discomfort").get<double>(),
                       source_from_string(j.value("source", "socnav"))},
                      std::nullopt};
      if (!(t.example.discomfort >= 0.0 && t.example.discomfort <= 100.0)) {
        throw ParseError("discomfort outside [0, 100]");
      }
      if (j.contains("split")) t.split = j.at("split").get<std::string>();
      out.push_back(std::move(t));
    } catch (const std::exception& e) {
      throw ParseError("line " + std::to_string(index) + ": " + e.what());
    }
    ++index;
  }
  return out;
}

void write_examples_jsonl(const std::filesystem::path& path, const DatasetSplit& split) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : split.train) out << example_to_json_line(e, "train") << '\n';
  for (const auto& e : split.validation) out << example_to_json_line(e, "validation") << '\n';
  for (const auto& e : split.test) out << example_to_json_line(e, "test") << '\n';
}

void write_examples_jsonl(const std::filesystem::path& path, const std::vector<LabeledExample>& examples) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  for (const auto& e : examples) out << example_to_json_line(e) << '\n';
}

DatasetSplit split_from_tagged(const std::vector<TaggedExample>& tagged, std::uint64_t seed) {
  const bool all_tagged =
      !tagged.empty() && std::all_of(tagged.begin(), tagged.end(), [](const auto& t) { return t.split.has_value(); });
  if (!all_tagged) {
    std::vector<LabeledExample> plain;
    plain.reserve(tagged.size());
    for (const auto& t : tagged) plain.push_back(t.example);
    return split(plain, SplitRatios{}, seed);
  }
  DatasetSplit out;
  out.seed = seed;
  for (const auto& t : tagged) {
    if (*t.split == "train") {
      out.train.push_back(t.example);
    } else if (*t.split == "validation") {
      out.validation.push_back(t.example);
    } else if (*t.split == "test") {
      out.test.push_back(t.example);
    } else {
      throw ParseError("unknown split tag '" + *t.split + "'");
    }
  }
  return out;
}

}  // namespace proxilab
