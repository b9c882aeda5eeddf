#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "advexp/text.hpp"

namespace advexp {

/// Resolves the generic "pair" task kind from the gold label: labels listed
/// here are matched cases, anything else is unmatched.
struct PairLabelMapping {
  std::set<std::string> matched_labels;
};

/// Record shape:
///   {"id": "...", "sentences": ["The girl sings ."], "trees": ["(S ...)"],
///    "label": "positive", "task_kind": "single"}
/// Sentence strings must equal the tree leaves joined by single spaces.
LabeledText text_from_json(const nlohmann::json& record, const PairLabelMapping* mapping = nullptr);
nlohmann::json text_to_json(const LabeledText& text);

std::vector<LabeledText> read_dataset(const std::filesystem::path& path,
                                      const PairLabelMapping* mapping = nullptr);
void write_dataset(const std::filesystem::path& path, const std::vector<LabeledText>& texts);

/// Reads one JSON value per non-empty line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path, const std::vector<nlohmann::json>& records);

}  // namespace advexp
