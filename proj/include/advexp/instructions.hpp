#pragma once

#include <string>
#include <utility>
#include <vector>

#include "advexp/rules.hpp"
#include "advexp/text.hpp"

namespace advexp {

/// A constituent occurrence targeted by an instruction.
struct ConstituentRef {
  int sentence = 1;  // 1-based
  Span span;
  std::string rule;
  bool operator==(const ConstituentRef&) const = default;
};

/// I = <c, t, P>: modify constituent c with a modifier of one of the allowed
/// types, inserted at every position in P (two positions for matched pairs).
struct InsertionInstruction {
  std::vector<std::string> constituent;  // surface tokens of c
  ModifierTypeSet allowed_types;
  std::vector<Position> positions;       // sorted; one per target
  std::vector<ConstituentRef> targets;   // aligned with positions

  /// Lower-cased constituent tokens, as fed to the generative model.
  [[nodiscard]] std::vector<std::string> constituent_norm() const;
  bool operator==(const InsertionInstruction&) const = default;
};

/// A modifier already attached under an expandable node.
struct AttachedModifier {
  ModifierType type;
  std::size_t child_index;
  Span span;
};

/// A tree node some template rule can expand.
struct ExpandableNode {
  const ParseTree* node = nullptr;
  const TemplateRule* rule = nullptr;
  int slot = 0;  // j of the insertion position (words before the slot)
};

/// Modifiers attached to `node` under `rule`'s attachment conventions.
std::vector<AttachedModifier> attached_modifiers(const ParseTree& node, const TemplateRule& rule);

ModifierTypeSet existing_modifier_types(const ParseTree& node, const TemplateRule& rule);
/// Uses the first rule whose category matches the node; empty set if none does.
ModifierTypeSet existing_modifier_types(const ParseTree& node, const RuleSet& rules = RuleSet::default_rules());

/// Every node matched by some rule, in document order (span start, then outer first).
std::vector<ExpandableNode> expandable_nodes(const ParseTree& tree, const RuleSet& rules);

/// One instruction per template match with a non-empty allowed type set.
std::vector<InsertionInstruction> extract_candidates(const Sentence& sentence, int sentence_index,
                                                     const RuleSet& rules = RuleSet::default_rules());

/// Candidate pairs (first from s1 as sentence 1, second from s2 as sentence 2)
/// whose case-folded surface tokens and rule agree; leftmost-first matching.
std::vector<std::pair<InsertionInstruction, InsertionInstruction>> shared_constituents(
    const Sentence& s1, const Sentence& s2, const RuleSet& rules = RuleSet::default_rules());

/// Single and unmatched texts: the union of per-sentence candidates.
/// Matched pairs: one instruction per shared constituent covering both sentences.
/// An empty result means the text is left unmodified.
std::vector<InsertionInstruction> build_instructions(const LabeledText& text,
                                                     const RuleSet& rules = RuleSet::default_rules());

}  // namespace advexp
