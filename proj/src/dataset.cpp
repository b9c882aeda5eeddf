#include "advexp/dataset.hpp"

#include <fstream>

namespace advexp {

LabeledText text_from_json(const nlohmann::json& record, const PairLabelMapping* mapping) {
  LabeledText text;
  try {
    text.id = record.contains("id") ? (record["id"].is_string() ? record["id"].get<std::string>()
                                                                 : record["id"].dump())
                                    : std::string();
    const auto& label = record.at("label");
    text.label = label.is_string() ? label.get<std::string>() : label.dump();

    const auto& trees = record.at("trees");
    for (const auto& tree_text : trees) text.sentences.emplace_back(parse_ptb(tree_text.get<std::string>()));

    if (record.contains("sentences")) {
      const auto& sents = record["sentences"];
      if (sents.size() != text.sentences.size())
        throw FormatError("record '" + text.id + "': sentence/tree count mismatch");
      for (std::size_t i = 0; i < sents.size(); ++i) {
        if (split_whitespace(sents[i].get<std::string>()) != text.sentences[i].tokens())
          throw FormatError("record '" + text.id + "': tree leaves differ from sentence " + std::to_string(i + 1));
      }
    }

    std::string kind = record.value("task_kind", std::string("single"));
    if (kind == "pair") {
      if (mapping == nullptr) throw FormatError("record '" + text.id + "': task_kind 'pair' needs a label mapping");
      text.kind = mapping->matched_labels.count(text.label) ? TaskKind::kPairMatched : TaskKind::kPairUnmatched;
    } else if (auto k = parse_task_kind(kind)) {
      text.kind = *k;
    } else {
      throw FormatError("record '" + text.id + "': unknown task_kind '" + kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed text record: ") + e.what());
  }
  text.validate();
  return text;
}

nlohmann::json text_to_json(const LabeledText& text) {
  nlohmann::json j;
  j["id"] = text.id;
  j["label"] = text.label;
  j["task_kind"] = std::string(to_string(text.kind));
  auto& sents = j["sentences"] = nlohmann::json::array();
  auto& trees = j["trees"] = nlohmann::json::array();
  for (const auto& s : text.sentences) {
    sents.push_back(join(s.tokens()));
    trees.push_back(to_ptb(s.tree()));
  }
  return j;
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<nlohmann::json> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& r : records) out << r.dump() << '\n';
}

std::vector<LabeledText> read_dataset(const std::filesystem::path& path, const PairLabelMapping* mapping) {
  std::vector<LabeledText> out;
  int n = 0;
  for (const auto& rec : read_jsonl(path)) {
    auto text = text_from_json(rec, mapping);
    if (text.id.empty()) text.id = std::to_string(n);
    out.push_back(std::move(text));
    ++n;
  }
  return out;
}

void write_dataset(const std::filesystem::path& path, const std::vector<LabeledText>& texts) {
  std::vector<nlohmann::json> recs;
  recs.reserve(texts.size());
  for (const auto& t : texts) recs.push_back(text_to_json(t));
  write_jsonl(path, recs);
}

}  // namespace advexp
