#pragma once

#include "proxilab/geometry.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace proxilab {

struct SocNavEntity {
  std::string id;
  Pose2D pose;
};

/// One SocNav1 record. Coordinates are taken as meters in the robot-centric
/// frame of the dataset.
struct SocNavScenario {
  std::string scenario_id;
  std::string robot_id;
  RoomPolygon walls;
  Pose2D robot;
  std::vector<SocNavEntity> humans;
  std::vector<SocNavEntity> objects;
  std::vector<std::pair<std::string, std::string>> interactions;
  int score = 0;
};

enum class ExampleSource { socnav, session, synthetic };

const char* to_string(ExampleSource s);
ExampleSource source_from_string(const std::string& s);

struct LabeledExample {
  FeatureVector features;
  double discomfort = 0.0;
  ExampleSource source = ExampleSource::socnav;
};

struct DatasetSplit {
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
  std::uint64_t seed = 0;
};

/// Reads a SocNav1 file: a JSON array of records or one record per line.
/// Throws IoError for missing files and ParseError naming the record index.
std::vector<SocNavScenario> parse_dataset(const std::filesystem::path& path);
std::vector<SocNavScenario> parse_dataset_text(const std::string& text);

/// Serializes records in the native format (orientations in degrees).
std::string scenarios_to_json(const std::vector<SocNavScenario>& scenarios);
void write_dataset(const std::filesystem::path& path, const std::vector<SocNavScenario>& scenarios);

/// Keeps scenarios with exactly one human that takes part in no interaction.
std::vector<SocNavScenario> filter_single_human(const std::vector<SocNavScenario>& scenarios);

/// discomfort = 100 - score. Propagates OutsideRoom / DegenerateScenario.
LabeledExample to_labeled_example(const SocNavScenario& scenario);

struct LabelingResult {
  std::vector<LabeledExample> examples;
  std::vector<std::string> warnings;
};

/// Labels every scenario, skipping (with a warning) those whose geometry is
/// unusable.
LabelingResult to_labeled_examples(const std::vector<SocNavScenario>& scenarios);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

SplitRatios parse_ratios(const std::string& text);

/// Seeded shuffle, then partition. Ratios must be non-negative and sum to 1.
DatasetSplit split(const std::vector<LabeledExample>& examples, SplitRatios ratios, std::uint64_t seed);

// Canonical JSONL of labeled examples. `split` tags are optional per line.
struct TaggedExample {
  LabeledExample example;
  std::optional<std::string> split;
};

std::string example_to_json_line(const LabeledExample& e, const std::optional<std::string>& split = {});
std::vector<TaggedExample> read_examples_jsonl(const std::filesystem::path& path);
void write_examples_jsonl(const std::filesystem::path& path, const DatasetSplit& split);
void write_examples_jsonl(const std::filesystem::path& path, const std::vector<LabeledExample>& examples);

/// Rebuilds a split from tagged lines, or splits untagged data with `seed`.
DatasetSplit split_from_tagged(const std::vector<TaggedExample>& tagged, std::uint64_t seed);

}  // namespace proxilab
