#include "advexp/instructions.hpp"

#include <algorithm>
#include <set>

namespace advexp {

namespace {

bool label_in(std::string_view label, const std::vector<std::string>& list) {
  auto base = strip_function_tags(label);
  return std::find(list.begin(), list.end(), base) != list.end();
}

// Slot right after the node's last non-punctuation token; -1 if there is none.
int slot_after_last_word(const ParseTree& node, const std::vector<std::string>& tokens) {
  for (int k = node.span.end - 1; k >= node.span.start; --k)
    if (!is_punctuation(tokens[k])) return k + 1;
  return -1;
}

bool eligible(const ParseTree& node, const ParseTree* parent, bool is_first_child, const TemplateRule& rule) {
  if (node.is_leaf() || !rule.matches_category(node.label)) return false;
  if (parent != nullptr && is_first_child && label_in(parent->label, rule.skip_if_head_of)) return false;
  for (const auto& c : node.children)
    if (!c.is_leaf() && label_in(c.label, rule.skip_if_child)) return false;
  if (node.span.length() == 1) {
    const ParseTree* leaf = &node;
    while (!leaf->is_leaf()) leaf = &leaf->children.front();
    if (label_in(leaf->label, rule.skip_single_tags)) return false;
  }
  return true;
}

InsertionInstruction make_instruction(const Sentence& s, int sentence_index, const ExpandableNode& e) {
  InsertionInstruction ins;
  const auto& toks = s.tokens();
  ins.constituent.assign(toks.begin() + e.node->span.start, toks.begin() + e.node->span.end);
  // Trailing punctuation inside the node is not part of c.
  while (!ins.constituent.empty() && is_punctuation(ins.constituent.back())) ins.constituent.pop_back();
  ins.allowed_types = e.rule->types.minus(existing_modifier_types(*e.node, *e.rule));
  ins.positions = {Position{sentence_index, e.slot}};
  ins.targets = {ConstituentRef{sentence_index, e.node->span, e.rule->name}};
  return ins;
}

std::vector<std::string> folded(const std::vector<std::string>& toks) {
  std::vector<std::string> out;
  out.reserve(toks.size());
  for (const auto& t : toks) out.push_back(lowercase(t));
  return out;
}

}  // namespace

std::vector<std::string> InsertionInstruction::constituent_norm() const { return folded(constituent); }

std::vector<AttachedModifier> attached_modifiers(const ParseTree& node, const TemplateRule& rule) {
  std::vector<AttachedModifier> out;
  for (std::size_t i = static_cast<std::size_t>(std::max(rule.modifiers_from_child, 0)); i < node.children.size();
       ++i) {
    const auto& c = node.children[i];
    const auto base = strip_function_tags(c.label);
    if (!c.is_leaf() && label_in(base, rule.appositive_labels)) {
      if (i > 0 && node.children[i - 1].is_leaf() && node.children[i - 1].word == ",")
        out.push_back({ModifierType::kAppos, i, c.span});
      continue;
    }
    if (auto it = rule.modifier_labels.find(base); it != rule.modifier_labels.end())
      out.push_back({it->second, i, c.span});
  }
  return out;
}

ModifierTypeSet existing_modifier_types(const ParseTree& node, const TemplateRule& rule) {
  ModifierTypeSet s;
  for (const auto& m : attached_modifiers(node, rule)) s.insert(m.type);
  return s;
}

ModifierTypeSet existing_modifier_types(const ParseTree& node, const RuleSet& rules) {
  const TemplateRule* rule = rules.find_for(node.label);
  return rule ? existing_modifier_types(node, *rule) : ModifierTypeSet{};
}

std::vector<ExpandableNode> expandable_nodes(const ParseTree& tree, const RuleSet& rules) {
  std::vector<ExpandableNode> out;
  const auto tokens = tree.leaves();
  auto walk = [&](const ParseTree& n, const ParseTree* parent, bool first, auto&& self) -> void {
    for (const auto& rule : rules.rules()) {
      if (!eligible(n, parent, first, rule)) continue;
      int slot = slot_after_last_word(n, tokens);
      if (slot > 0) out.push_back({&n, &rule, slot});
      break;
    }
    for (std::size_t i = 0; i < n.children.size(); ++i) self(n.children[i], &n, i == 0, self);
  };
  walk(tree, nullptr, false, walk);
  std::stable_sort(out.begin(), out.end(), [](const ExpandableNode& a, const ExpandableNode& b) {
    if (a.node->span.start != b.node->span.start) return a.node->span.start < b.node->span.start;
    return a.node->span.end > b.node->span.end;
  });
  return out;
}

std::vector<InsertionInstruction> extract_candidates(const Sentence& sentence, int sentence_index,
                                                     const RuleSet& rules) {
  std::vector<InsertionInstruction> all;
  std::vector<bool> is_fallback;
  for (const auto& e : expandable_nodes(sentence.tree(), rules)) {
    auto ins = make_instruction(sentence, sentence_index, e);
    if (ins.allowed_types.empty() || ins.constituent.empty()) continue;
    all.push_back(std::move(ins));
    is_fallback.push_back(e.rule->fallback);
  }
  std::set<int> primary_slots;
  for (std::size_t i = 0; i < all.size(); ++i)
    if (!is_fallback[i]) primary_slots.insert(all[i].positions.front().word);
  std::vector<InsertionInstruction> out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (is_fallback[i] && primary_slots.count(all[i].positions.front().word)) continue;
    out.push_back(std::move(all[i]));
  }
  return out;
}

std::vector<std::pair<InsertionInstruction, InsertionInstruction>> shared_constituents(const Sentence& s1,
                                                                                       const Sentence& s2,
                                                                                       const RuleSet& rules) {
  auto left = extract_candidates(s1, 1, rules);
  auto right = extract_candidates(s2, 2, rules);
  std::vector<bool> used(right.size(), false);
  std::vector<std::pair<InsertionInstruction, InsertionInstruction>> out;
  for (auto& a : left) {
    const auto key = a.constituent_norm();
    for (std::size_t k = 0; k < right.size(); ++k) {
      if (used[k] || right[k].targets.front().rule != a.targets.front().rule) continue;
      if (right[k].constituent_norm() != key) continue;
      used[k] = true;
      out.emplace_back(a, right[k]);
      break;
    }
  }
  return out;
}

std::vector<InsertionInstruction> build_instructions(const LabeledText& text, const RuleSet& rules) {
  std::vector<InsertionInstruction> out;
  if (text.kind == TaskKind::kPairMatched) {
    if (text.sentences.size() != 2) return out;
    for (auto& [a, b] : shared_constituents(text.sentences[0], text.sentences[1], rules)) {
      InsertionInstruction ins;
      ins.constituent = a.constituent;
      ins.allowed_types = a.allowed_types & b.allowed_types;
      if (ins.allowed_types.empty()) continue;
      ins.positions = {a.positions.front(), b.positions.front()};
      ins.targets = {a.targets.front(), b.targets.front()};
      out.push_back(std::move(ins));
    }
    return out;
  }
  for (std::size_t i = 0; i < text.sentences.size(); ++i) {
    auto cands = extract_candidates(text.sentences[i], static_cast<int>(i) + 1, rules);
    out.insert(out.end(), std::make_move_iterator(cands.begin()), std::make_move_iterator(cands.end()));
  }
  return out;
}

}  // namespace advexp
