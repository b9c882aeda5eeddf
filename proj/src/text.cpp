#include "advexp/text.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

namespace advexp {

std::string_view to_string(ModifierType t) {
  switch (t) {
    case ModifierType::kAdvp: return "ADVP";
    case ModifierType::kPp: return "PP";
    case ModifierType::kAppos: return "APPOS";
    case ModifierType::kCl: return "CL";
  }
  return "?";
}

std::optional<ModifierType> parse_modifier_type(std::string_view s) {
  std::string u;
  for (char c : s) u.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  if (u == "ADVP") return ModifierType::kAdvp;
  if (u == "PP") return ModifierType::kPp;
  if (u == "APPOS") return ModifierType::kAppos;
  if (u == "CL" || u == "CL.") return ModifierType::kCl;
  return std::nullopt;
}

int ModifierTypeSet::size() const {
  int n = 0;
  for (auto t : kAllModifierTypes) n += contains(t) ? 1 : 0;
  return n;
}

std::vector<ModifierType> ModifierTypeSet::to_vector() const {
  std::vector<ModifierType> out;
  for (auto t : kAllModifierTypes)
    if (contains(t)) out.push_back(t);
  return out;
}

std::string to_string(ModifierTypeSet s) {
  std::string out;
  for (auto t : s.to_vector()) {
    if (!out.empty()) out += "/";
    out += to_string(t);
  }
  return out;
}

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::kSingle: return "single";
    case TaskKind::kPairMatched: return "pair_matched";
    case TaskKind::kPairUnmatched: return "pair_unmatched";
  }
  return "?";
}

std::optional<TaskKind> parse_task_kind(std::string_view s) {
  if (s == "single") return TaskKind::kSingle;
  if (s == "pair_matched") return TaskKind::kPairMatched;
  if (s == "pair_unmatched") return TaskKind::kPairUnmatched;
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// ParseTree

std::vector<std::string> ParseTree::leaves() const {
  std::vector<std::string> out;
  auto walk = [&out](const ParseTree& n, auto&& self) -> void {
    if (n.is_leaf()) {
      out.push_back(n.word);
      return;
    }
    for (const auto& c : n.children) self(c, self);
  };
  walk(*this, walk);
  return out;
}

int ParseTree::reindex(int first) {
  span.start = first;
  if (is_leaf()) {
    span.end = first + 1;
    return span.end;
  }
  int at = first;
  for (auto& c : children) at = c.reindex(at);
  span.end = at;
  return at;
}

bool ParseTree::spans_consistent() const {
  if (is_leaf()) return children.empty() && span.length() == 1;
  if (children.empty()) return false;
  int at = span.start;
  for (const auto& c : children) {
    if (c.span.start != at || !c.spans_consistent()) return false;
    at = c.span.end;
  }
  return at == span.end;
}

namespace {

class PtbReader {
 public:
  explicit PtbReader(std::string_view s) : s_(s) {}

  ParseTree read_tree() {
    skip_ws();
    expect('(');
    skip_ws();
    ParseTree node;
    if (peek() != '(') node.label = read_atom();
    skip_ws();
    if (peek() == '(') {
      while (true) {
        skip_ws();
        if (peek() == ')') break;
        if (peek() != '(') fail("expected '(' or ')'");
        node.children.push_back(read_tree());
      }
    } else {
      node.word = read_atom();
      if (node.word.empty()) fail("empty leaf");
      if (node.label.empty()) fail("preterminal without label");
    }
    skip_ws();
    expect(')');
    return node;
  }

  void finish() {
    skip_ws();
    if (pos_ != s_.size()) fail("trailing characters");
  }

 private:
  [[noreturn]] void fail(const std::string& why) const {
    throw FormatError("PTB parse error at offset " + std::to_string(pos_) + ": " + why);
  }
  char peek() const { return pos_ < s_.size() ? s_[pos_] : '\0'; }
  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }
  void skip_ws() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  std::string read_atom() {
    std::size_t b = pos_;
    while (pos_ < s_.size() && s_[pos_] != '(' && s_[pos_] != ')' &&
           !std::isspace(static_cast<unsigned char>(s_[pos_])))
      ++pos_;
    return std::string(s_.substr(b, pos_ - b));
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

void write_ptb(const ParseTree& n, std::string& out) {
  out += '(';
  out += n.label;
  if (n.is_leaf()) {
    out += ' ';
    out += n.word;
  } else {
    for (const auto& c : n.children) {
      out += ' ';
      write_ptb(c, out);
    }
  }
  out += ')';
}

}  // namespace

ParseTree parse_ptb(std::string_view text) {
  PtbReader reader(text);
  ParseTree t = reader.read_tree();
  reader.finish();
  while (t.label.empty() && !t.is_leaf() && t.children.size() == 1) {
    ParseTree inner = std::move(t.children.front());
    t = std::move(inner);
  }
  if (t.label.empty()) throw FormatError("PTB tree has no root label");
  t.reindex(0);
  return t;
}

std::string to_ptb(const ParseTree& tree) {
  std::string out;
  write_ptb(tree, out);
  return out;
}

// ---------------------------------------------------------------------------
// Tokens

bool is_punctuation(std::string_view token) {
  if (token.empty()) return false;
  return std::all_of(token.begin(), token.end(),
                     [](char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; });
}

std::string lowercase(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_whitespace(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t b = i;
    while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > b) out.emplace_back(s.substr(b, i - b));
  }
  return out;
}

std::string detokenize(std::span<const std::string> tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    bool glue = i == 0 || (is_punctuation(t) && t != "--" && t != "``" && t != "(") ||
                t.rfind("'", 0) == 0 || t == "n't";
    if (!glue) out += ' ';
    out += t;
  }
  return out;
}

std::string join(std::span<const std::string> tokens, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += sep;
    out += tokens[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sentence / LabeledText

Sentence::Sentence(ParseTree tree) : tree_(std::move(tree)) {
  tree_.reindex(0);
  tokens_ = tree_.leaves();
  norm_.reserve(tokens_.size());
  for (const auto& t : tokens_) norm_.push_back(lowercase(t));
}

void LabeledText::validate() const {
  if (sentences.empty()) throw FormatError("text '" + id + "' has no sentences");
  if (is_pair(kind) && sentences.size() != 2)
    throw FormatError("pair text '" + id + "' must have exactly 2 sentences");
  for (const auto& s : sentences) {
    if (s.size() == 0) throw FormatError("text '" + id + "' has an empty sentence");
    if (!s.tree().spans_consistent()) throw FormatError("text '" + id + "' has inconsistent tree spans");
  }
}

int LabeledText::token_count() const {
  int n = 0;
  for (const auto& s : sentences) n += s.size();
  return n;
}

// ---------------------------------------------------------------------------
// Insertion

namespace {

std::string_view tree_label(ModifierType t) {
  switch (t) {
    case ModifierType::kAdvp: return "ADVP";
    case ModifierType::kPp: return "PP";
    case ModifierType::kAppos: return "NP";
    case ModifierType::kCl: return "SBAR";
  }
  return "X";
}

bool takes_commas(ModifierType t) { return t == ModifierType::kAppos || t == ModifierType::kCl; }

ParseTree comma_node() {
  ParseTree n;
  n.label = ",";
  n.word = ",";
  return n;
}

// Inserts `nodes` into `node` so that they start at token boundary `at`,
// descending into the child that strictly straddles the boundary.
void adjoin(ParseTree& node, int at, std::vector<ParseTree>& nodes) {
  for (auto& c : node.children) {
    if (!c.is_leaf() && c.span.start < at && at < c.span.end) {
      adjoin(c, at, nodes);
      return;
    }
  }
  auto it = std::find_if(node.children.begin(), node.children.end(),
                         [at](const ParseTree& c) { return c.span.start >= at; });
  node.children.insert(it, std::make_move_iterator(nodes.begin()), std::make_move_iterator(nodes.end()));
}

ParseTree* find_highest(ParseTree& node, Span s) {
  if (!node.is_leaf() && node.span == s) return &node;
  for (auto& c : node.children) {
    if (c.span.start <= s.start && s.end <= c.span.end)
      if (auto* hit = find_highest(c, s)) return hit;
  }
  return nullptr;
}

struct CommaPadding {
  bool lead = false;
  bool trail = false;
};

CommaPadding comma_padding(const Sentence& sentence, int word, ModifierType type) {
  if (!takes_commas(type)) return {};
  const auto& toks = sentence.tokens();
  return {word > 0 && !is_punctuation(toks[word - 1]),
          word < sentence.size() && !is_punctuation(toks[word])};
}

}  // namespace

std::vector<std::string> surface_tokens(const Sentence& sentence, int word, const Modifier& m) {
  auto pad = comma_padding(sentence, word, m.type);
  std::vector<std::string> out;
  if (pad.lead) out.emplace_back(",");
  out.insert(out.end(), m.tokens.begin(), m.tokens.end());
  if (pad.trail) out.emplace_back(",");
  return out;
}

LabeledText insert_modifier(const LabeledText& text, Position pos, const Modifier& m) {
  Insertion ins{pos, m, std::nullopt};
  return insert_many(text, std::span<const Insertion>(&ins, 1));
}

LabeledText insert_many(const LabeledText& text, std::span<const Insertion> insertions) {
  const int n_sent = static_cast<int>(text.sentences.size());
  std::map<int, std::vector<const Insertion*>> by_sentence;
  std::set<Position> slots;
  for (const auto& ins : insertions) {
    if (ins.modifier.tokens.empty()) throw std::invalid_argument("empty modifier");
    if (ins.pos.sentence < 1 || ins.pos.sentence > n_sent)
      throw PositionError("sentence index " + std::to_string(ins.pos.sentence) + " out of range");
    const auto& s = text.sentences[ins.pos.sentence - 1];
    if (ins.pos.word < 0 || ins.pos.word > s.size())
      throw PositionError("word index " + std::to_string(ins.pos.word) + " out of range");
    if (!slots.insert(ins.pos).second)
      throw std::invalid_argument("duplicate insertion slot (" + std::to_string(ins.pos.sentence) + "," +
                                  std::to_string(ins.pos.word) + ")");
    by_sentence[ins.pos.sentence - 1].push_back(&ins);
  }
  if (by_sentence.empty()) return text;

  LabeledText out = text;
  for (auto& [si, list] : by_sentence) {
    const Sentence& orig = text.sentences[si];
    ParseTree tree = orig.tree();
    // Right to left, so every pending slot still addresses original coordinates.
    std::sort(list.begin(), list.end(), [](auto* a, auto* b) { return a->pos.word > b->pos.word; });
    for (const Insertion* ins : list) {
      const int at = ins->pos.word;
      auto pad = comma_padding(orig, at, ins->modifier.type);
      ParseTree mod;
      mod.label = std::string(tree_label(ins->modifier.type));
      for (const auto& tok : ins->modifier.tokens) {
        ParseTree leaf;
        leaf.label = is_punctuation(tok) ? tok : "X";
        leaf.word = tok;
        mod.children.push_back(std::move(leaf));
      }
      std::vector<ParseTree> nodes;
      if (pad.lead) nodes.push_back(comma_node());
      nodes.push_back(std::move(mod));
      if (pad.trail) nodes.push_back(comma_node());

      ParseTree* target = nullptr;
      if (ins->attach && ins->attach->end == at) target = find_highest(tree, *ins->attach);
      if (target != nullptr) {
        int end = target->span.end;
        adjoin(*target, end, nodes);
      } else {
        adjoin(tree, at, nodes);
      }
      tree.reindex(0);
    }
    out.sentences[si] = Sentence(std::move(tree));
  }
  return out;
}

bool is_subsequence(std::span<const std::string> original, std::span<const std::string> expanded) {
  std::size_t i = 0;
  for (std::size_t k = 0; k < expanded.size() && i < original.size(); ++k)
    if (expanded[k] == original[i]) ++i;
  return i == original.size();
}

bool is_subsequence(const LabeledText& original, const LabeledText& expanded) {
  if (original.sentences.size() != expanded.sentences.size()) return false;
  for (std::size_t i = 0; i < original.sentences.size(); ++i)
    if (!is_subsequence(original.sentences[i].tokens(), expanded.sentences[i].tokens())) return false;
  return true;
}

}  // namespace advexp
