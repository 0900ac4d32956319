#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace proxilab {

/// One object the robot carries, with its two-choice question.
struct DialogueItem {
  std::string object;
  std::string question;
  std::array<std::string, 2> answers;
  std::array<std::string, 2> responses;

  bool operator==(const DialogueItem&) const = default;
};

/// Parses a JSON array of {object, question, answers:[a,b], responses:[ra,rb]}.
/// Throws ParseError when a record does not carry exactly two of each.
std::vector<DialogueItem> parse_dialogue(const std::string& text);
std::vector<DialogueItem> load_dialogue(const std::filesystem::path& path);

std::string dialogue_item_to_json(const DialogueItem& item);

}  // namespace proxilab
