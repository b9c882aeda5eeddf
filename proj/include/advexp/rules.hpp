#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advexp/text.hpp"

namespace advexp {

/// One parsing template: which nodes are expandable, which modifier types
/// they accept, and how already-attached modifiers are recognised.
struct TemplateRule {
  std::string name;
  /// Node labels (function tags such as "-SBJ" are stripped before matching).
  std::vector<std::string> categories;
  ModifierTypeSet types;
  /// Only "after_last_word" is defined: the slot right after the node's last
  /// non-punctuation token.
  std::string position = "after_last_word";
  /// Skip a node that is the first child of a parent with one of these labels
  /// (the head of a complex phrase; the parent is the expandable node).
  std::vector<std::string> skip_if_head_of;
  /// Skip a node that has a child with one of these labels.
  std::vector<std::string> skip_if_child;
  /// Skip single-token nodes whose POS tag is listed (pronouns and the like).
  std::vector<std::string> skip_single_tags;
  /// Children from this index on are inspected for existing modifiers.
  int modifiers_from_child = 1;
  /// Child label -> modifier type it represents under this node.
  std::map<std::string, ModifierType> modifier_labels;
  /// Child labels that count as appositives only when preceded by a comma.
  std::vector<std::string> appositive_labels;
  /// A fallback rule's instruction is dropped when another instruction
  /// occupies the same slot.
  bool fallback = false;

  [[nodiscard]] bool matches_category(std::string_view label) const;
};

class RuleSet {
 public:
  RuleSet() = default;
  explicit RuleSet(std::vector<TemplateRule> rules);

  /// NP -> {PP, APPOS, CL}; VP -> {ADVP, PP}; S -> sentence-final {ADVP, PP}.
  static const RuleSet& default_rules();
  static RuleSet from_json(const nlohmann::json& j);
  static RuleSet load(const std::filesystem::path& path);

  [[nodiscard]] nlohmann::json to_json() const;
  /// FNV-1a over the canonical JSON form; stored in CVAE checkpoints.
  [[nodiscard]] std::uint64_t hash() const;
  [[nodiscard]] std::string hash_hex() const;

  [[nodiscard]] const std::vector<TemplateRule>& rules() const { return rules_; }
  [[nodiscard]] const TemplateRule* find_for(std::string_view label) const;

 private:
  std::vector<TemplateRule> rules_;
};

std::string strip_function_tags(std::string_view label);

}  // namespace advexp
