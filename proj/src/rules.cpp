#include "advexp/rules.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace advexp {

std::string strip_function_tags(std::string_view label) {
  // "NP-SBJ-1" -> "NP", "PP=2" -> "PP"; punctuation labels like "-LRB-" pass through.
  if (label.empty() || label.front() == '-') return std::string(label);
  auto cut = label.find_first_of("-=");
  return std::string(label.substr(0, cut));
}

bool TemplateRule::matches_category(std::string_view label) const {
  auto base = strip_function_tags(label);
  return std::find(categories.begin(), categories.end(), base) != categories.end();
}

RuleSet::RuleSet(std::vector<TemplateRule> rules) : rules_(std::move(rules)) {}

const RuleSet& RuleSet::default_rules() {
  static const RuleSet rules = [] {
    TemplateRule np;
    np.name = "noun-phrase";
    np.categories = {"NP"};
    np.types = {ModifierType::kPp, ModifierType::kAppos, ModifierType::kCl};
    np.skip_if_head_of = {"NP"};
    np.skip_single_tags = {"PRP", "PRP$", "EX", "WP", "WDT", "CD"};
    np.modifiers_from_child = 1;
    np.modifier_labels = {{"PP", ModifierType::kPp},  {"ADVP", ModifierType::kAdvp}, {"SBAR", ModifierType::kCl},
                          {"RRC", ModifierType::kCl}, {"VP", ModifierType::kCl},     {"S", ModifierType::kCl}};
    np.appositive_labels = {"NP"};

    TemplateRule vp;
    vp.name = "verb-phrase";
    vp.categories = {"VP"};
    vp.types = {ModifierType::kAdvp, ModifierType::kPp};
    vp.skip_if_child = {"VP"};
    vp.modifiers_from_child = 1;
    vp.modifier_labels = {{"PP", ModifierType::kPp}, {"ADVP", ModifierType::kAdvp}, {"RB", ModifierType::kAdvp}};

    TemplateRule s;
    s.name = "clause";
    s.categories = {"S"};
    s.types = {ModifierType::kAdvp, ModifierType::kPp};
    s.modifiers_from_child = 0;
    s.modifier_labels = {{"PP", ModifierType::kPp}, {"ADVP", ModifierType::kAdvp}};
    s.fallback = true;
    return RuleSet({np, vp, s});
  }();
  return rules;
}

namespace {

std::vector<std::string> strings(const nlohmann::json& j, const char* key) {
  if (!j.contains(key)) return {};
  return j.at(key).get<std::vector<std::string>>();
}

ModifierType type_or_throw(const std::string& s) {
  auto t = parse_modifier_type(s);
  if (!t) throw FormatError("unknown modifier type '" + s + "' in rules");
  return *t;
}

}  // namespace

RuleSet RuleSet::from_json(const nlohmann::json& j) {
  std::vector<TemplateRule> rules;
  try {
    for (const auto& r : j.at("rules")) {
      TemplateRule rule;
      rule.name = r.at("name").get<std::string>();
      rule.categories = strings(r, "categories");
      for (const auto& t : strings(r, "types")) rule.types.insert(type_or_throw(t));
      rule.position = r.value("position", std::string("after_last_word"));
      if (rule.position != "after_last_word")
        throw FormatError("rule '" + rule.name + "': unsupported position rule '" + rule.position + "'");
      rule.skip_if_head_of = strings(r, "skip_if_head_of");
      rule.skip_if_child = strings(r, "skip_if_child");
      rule.skip_single_tags = strings(r, "skip_single_tags");
      rule.modifiers_from_child = r.value("modifiers_from_child", 1);
      if (r.contains("modifier_labels"))
        for (const auto& [label, type] : r["modifier_labels"].items())
          rule.modifier_labels[label] = type_or_throw(type.get<std::string>());
      rule.appositive_labels = strings(r, "appositive_labels");
      rule.fallback = r.value("fallback", false);
      if (rule.categories.empty() || rule.types.empty())
        throw FormatError("rule '" + rule.name + "' needs categories and types");
      rules.push_back(std::move(rule));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed rules file: ") + e.what());
  }
  return RuleSet(std::move(rules));
}

RuleSet RuleSet::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open rules file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

nlohmann::json RuleSet::to_json() const {
  nlohmann::json out;
  out["version"] = 1;
  auto& arr = out["rules"] = nlohmann::json::array();
  for (const auto& r : rules_) {
    nlohmann::json j;
    j["name"] = r.name;
    j["categories"] = r.categories;
    std::vector<std::string> types;
    for (auto t : r.types.to_vector()) types.emplace_back(to_string(t));
    j["types"] = types;
    j["position"] = r.position;
    j["skip_if_head_of"] = r.skip_if_head_of;
    j["skip_if_child"] = r.skip_if_child;
    j["skip_single_tags"] = r.skip_single_tags;
    j["modifiers_from_child"] = r.modifiers_from_child;
    auto& labels = j["modifier_labels"] = nlohmann::json::object();
    for (const auto& [label, type] : r.modifier_labels) labels[label] = std::string(to_string(type));
    j["appositive_labels"] = r.appositive_labels;
    j["fallback"] = r.fallback;
    arr.push_back(std::move(j));
  }
  return out;
}

std::uint64_t RuleSet::hash() const {
  const std::string canon = to_json().dump();
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canon) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

std::string RuleSet::hash_hex() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash()));
  return buf;
}

const TemplateRule* RuleSet::find_for(std::string_view label) const {
  for (const auto& r : rules_)
    if (r.matches_category(label)) return &r;
  return nullptr;
}

}  // namespace advexp
