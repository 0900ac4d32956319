#include "proxilab/dialogue.hpp"

#include "proxilab/errors.hpp"

#include "json.hpp"

#include <fstream>
#include <sstream>

namespace proxilab {

using nlohmann::json;

namespace {

std::array<std::string, 2> pair_field(const json& rec, const char* key, std::size_t index) {
  if (!rec.contains(key) || !rec[key].is_array() || rec[key].size() != 2) {
    throw ParseError("dialogue record " + std::to_string(index) + ": '" + key + "' must hold exactly two strings");
  }
  return {rec[key][0].get<std::string>(), rec[key][1].get<std::string>()};
}

}  // namespace

std::vector<DialogueItem> parse_dialogue(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("dialogue: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("dialogue: expected a JSON array");
  std::vector<DialogueItem> items;
  items.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& rec = doc[i];
    try {
      DialogueItem item;
      item.object = rec.at("object").get<std::string>();
      item.question = rec.at("question").get<std::string>();
      item.answers = pair_field(rec, "answers", i);
      item.responses = pair_field(rec, "responses", i);
      items.push_back(std::move(item));
    } catch (const json::exception& e) {
      throw ParseError("dialogue record " + std::to_string(i) + ": " + e.what());
    }
  }
  if (items.empty()) throw ParseError("dialogue: no records");
  return items;
}

std::vector<DialogueItem> load_dialogue(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dialogue file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_dialogue(ss.str());
}

std::string dialogue_item_to_json(const DialogueItem& item) {
  json j{{"object", item.object},
         {"question", item.question},
         {"answers", item.answers},
         {"responses", item.responses}};
  return j.dump();
}

}  // namespace proxilab
