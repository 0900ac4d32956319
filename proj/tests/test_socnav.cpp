#include "proxilab/errors.hpp"
#include "proxilab/simlab.hpp"
#include "proxilab/socnav.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>

using namespace proxilab;

namespace {

const std::filesystem::path kData = PROXILAB_DATA_DIR;

std::filesystem::path temp_file(const std::string& name, const std::string& text) {
  const auto dir = std::filesystem::temp_directory_path() / "proxilab_test_socnav";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::ofstream(p) << text;
  return p;
}

std::vector<LabeledExample> ramp(int n) {
  std::vector<LabeledExample> v;
  for (int i = 0; i < n; ++i) {
    LabeledExample e;
    e.features.hr_dist = 0.1 * (i + 1);
    e.features.a = 10.0;
    e.discomfort = i;
    v.push_back(e);
  }
  return v;
}

}  // namespace

TEST_CASE("bundled three-record sample") {
  const auto all = parse_dataset(kData / "socnav_sample.json");
  REQUIRE(all.size() == 3);
  CHECK(all[0].scenario_id == "s0001");
  CHECK(all[0].robot.x == 0.0);
  CHECK(all[0].robot.heading == doctest::Approx(std::numbers::pi / 2));
  CHECK(all[0].humans[0].pose.heading == doctest::Approx(-95.0 * std::numbers::pi / 180.0));
  CHECK(all[1].humans.size() == 2);
  CHECK(all[2].interactions.size() == 1);

  const auto single = filter_single_human(all);
  REQUIRE(single.size() == 1);
  CHECK(single[0].scenario_id == "s0001");
  CHECK(filter_single_human(single).size() == single.size());

  const auto e = to_labeled_example(single[0]);
  CHECK(e.discomfort == doctest::Approx(28.0));
  CHECK(e.features.valid());
}

TEST_CASE("score flip endpoints") {
  auto s = parse_dataset(kData / "socnav_sample.json")[0];
  s.score = 100;
  CHECK(to_labeled_example(s).discomfort == 0.0);
  s.score = 0;
  CHECK(to_labeled_example(s).discomfort == 100.0);
  s.score = 42;
  CHECK(to_labeled_example(s).discomfort == 58.0);
}

TEST_CASE("parse errors and empty input") {
  CHECK(parse_dataset_text("").empty());
  CHECK(parse_dataset(temp_file("empty.json", "")).empty());
  CHECK_THROWS_AS(parse_dataset("/nonexistent/socnav.json"), IoError);

  const std::string bad = R"([{"identifier":"a","score":50,"room":[[-1,-1],[1,-1],[1,1],[-1,1]],"humans":[]},
                              {"identifier":"b","score":101,"room":[[-1,-1],[1,-1],[1,1],[-1,1]],"humans":[]}])";
  try {
    parse_dataset_text(bad);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(std::string(e.what()).find("record 1") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_dataset_text("[{\"identifier\": 1}]"), ParseError);
}

TEST_CASE("JSON-lines input") {
  const std::string text =
      R"({"identifier":"a","score":50,"room":[[-1,-1],[1,-1],[1,1],[-1,1]],"humans":[{"id":"h","xPos":0,"yPos":0.5}]})"
      "\n"
      R"({"identifier":"b","score":60,"room":[[-1,-1],[1,-1],[1,1],[-1,1]],"humans":[{"id":"h","xPos":0.2,"yPos":0.5}]})"
      "\n";
  const auto all = parse_dataset_text(text);
  REQUIRE(all.size() == 2);
  CHECK(all[1].score == 60);
}

TEST_CASE("native format round trip") {
  const auto fx = simlab::make_socnav_fixture(20, 3);
  const auto back = parse_dataset_text(scenarios_to_json(fx));
  REQUIRE(back.size() == fx.size());
  for (std::size_t i = 0; i < fx.size(); ++i) {
    CHECK(back[i].scenario_id == fx[i].scenario_id);
    CHECK(back[i].score == fx[i].score);
    CHECK(back[i].humans.size() == fx[i].humans.size());
    CHECK(back[i].humans[0].pose.heading == doctest::Approx(fx[i].humans[0].pose.heading).epsilon(1e-12));
    CHECK(back[i].interactions == fx[i].interactions);
  }
}

TEST_CASE("split sizes, determinism and validation") {
  const auto data = ramp(10);
  const auto s = split(data, {0.8, 0.1, 0.1}, 7);
  CHECK(s.train.size() == 8);
  CHECK(s.validation.size() == 1);
  CHECK(s.test.size() == 1);

  const auto again = split(data, {0.8, 0.1, 0.1}, 7);
  for (std::size_t i = 0; i < s.train.size(); ++i) CHECK(s.train[i].discomfort == again.train[i].discomfort);

  std::multiset<double> seen;
  for (const auto* part : {&s.train, &s.validation, &s.test}) {
    for (const auto& e : *part) seen.insert(e.discomfort);
  }
  CHECK(seen.size() == 10);
  CHECK(std::set<double>(seen.begin(), seen.end()).size() == 10);

  CHECK_THROWS_AS(split(data, {0.5, 0.5, 0.5}, 7), std::invalid_argument);
  CHECK_THROWS_AS(split(data, {1.2, -0.1, -0.1}, 7), std::invalid_argument);
  CHECK_THROWS_AS(parse_ratios("0.8,0.2"), std::invalid_argument);
}

TEST_CASE("split proportions stay within one example") {
  for (int n : {7, 13, 248, 301}) {
    const auto s = split(ramp(n), {0.7, 0.2, 0.1}, 1);
    CHECK(std::abs(static_cast<double>(s.train.size()) - 0.7 * n) <= 1.0);
    CHECK(std::abs(static_cast<double>(s.validation.size()) - 0.2 * n) <= 1.0);
    CHECK(std::abs(static_cast<double>(s.test.size()) - 0.1 * n) <= 1.0);
  }
}

TEST_CASE("labeled JSONL round trip keeps split tags") {
  const auto s = split(ramp(20), {0.6, 0.2, 0.2}, 5);
  const auto path = std::filesystem::temp_directory_path() / "proxilab_test_socnav" / "split.jsonl";
  std::filesystem::create_directories(path.parent_path());
  write_examples_jsonl(path, s);
  const auto back = split_from_tagged(read_examples_jsonl(path), 99);
  REQUIRE(back.train.size() == s.train.size());
  REQUIRE(back.validation.size() == s.validation.size());
  for (std::size_t i = 0; i < s.train.size(); ++i) {
    CHECK(back.train[i].discomfort == s.train[i].discomfort);
    CHECK(back.train[i].features == s.train[i].features);
  }
}

TEST_CASE("fixture pipeline is deterministic and every example is valid") {
  const auto a = to_labeled_examples(filter_single_human(simlab::make_socnav_fixture(300, 7)));
  const auto b = to_labeled_examples(filter_single_human(simlab::make_socnav_fixture(300, 7)));
  REQUIRE(a.examples.size() == b.examples.size());
  CHECK(a.examples.size() > 200);
  for (std::size_t i = 0; i < a.examples.size(); ++i) {
    CHECK(a.examples[i].features == b.examples[i].features);
    CHECK(a.examples[i].features.valid());
    CHECK(a.examples[i].discomfort >= 0.0);
    CHECK(a.examples[i].discomfort <= 100.0);
  }
}

TEST_CASE("bundled fixture file matches the generator") {
  const auto file = parse_dataset(kData / "socnav_synthetic_300.json");
  const auto gen = parse_dataset_text(scenarios_to_json(simlab::make_socnav_fixture(300, 7)));
  REQUIRE(file.size() == 300);
  REQUIRE(gen.size() == 300);
  for (std::size_t i = 0; i < file.size(); ++i) CHECK(file[i].score == gen[i].score);
}
