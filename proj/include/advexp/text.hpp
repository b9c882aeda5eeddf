#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace advexp {

/// Raised when an insertion position does not address a valid slot.
class PositionError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Raised for malformed input data (trees, records, config values).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModifierType : std::uint8_t { kAdvp = 0, kPp = 1, kAppos = 2, kCl = 3 };

inline constexpr std::array<ModifierType, 4> kAllModifierTypes = {
    ModifierType::kAdvp, ModifierType::kPp, ModifierType::kAppos, ModifierType::kCl};

std::string_view to_string(ModifierType t);
std::optional<ModifierType> parse_modifier_type(std::string_view s);

/// Small value-type set over the four modifier types.
class ModifierTypeSet {
 public:
  constexpr ModifierTypeSet() = default;
  ModifierTypeSet(std::initializer_list<ModifierType> types) {
    for (auto t : types) insert(t);
  }

  void insert(ModifierType t) { bits_ |= bit(t); }
  void erase(ModifierType t) { bits_ &= static_cast<std::uint8_t>(~bit(t)); }
  [[nodiscard]] bool contains(ModifierType t) const { return (bits_ & bit(t)) != 0; }
  [[nodiscard]] bool empty() const { return bits_ == 0; }
  [[nodiscard]] int size() const;
  [[nodiscard]] std::vector<ModifierType> to_vector() const;
  [[nodiscard]] std::uint8_t bits() const { return bits_; }

  [[nodiscard]] ModifierTypeSet operator&(ModifierTypeSet o) const { return from_bits(bits_ & o.bits_); }
  [[nodiscard]] ModifierTypeSet operator|(ModifierTypeSet o) const { return from_bits(bits_ | o.bits_); }
  [[nodiscard]] ModifierTypeSet minus(ModifierTypeSet o) const {
    return from_bits(bits_ & static_cast<std::uint8_t>(~o.bits_));
  }
  bool operator==(const ModifierTypeSet&) const = default;

  static ModifierTypeSet from_bits(unsigned b) {
    ModifierTypeSet s;
    s.bits_ = static_cast<std::uint8_t>(b & 0xF);
    return s;
  }

 private:
  static constexpr std::uint8_t bit(ModifierType t) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(t));
  }
  std::uint8_t bits_ = 0;
};

std::string to_string(ModifierTypeSet s);

enum class TaskKind : std::uint8_t { kSingle, kPairMatched, kPairUnmatched };

std::string_view to_string(TaskKind k);
std::optional<TaskKind> parse_task_kind(std::string_view s);
inline bool is_pair(TaskKind k) { return k != TaskKind::kSingle; }

/// Half-open token range [start, end) in sentence coordinates.
struct Span {
  int start = 0;
  int end = 0;
  [[nodiscard]] int length() const { return end - start; }
  bool operator==(const Span&) const = default;
  auto operator<=>(const Span&) const = default;
};

/// Constituency tree. A node with a non-empty `word` is a preterminal
/// (POS tag in `label`) covering exactly one token.
struct ParseTree {
  std::string label;
  std::string word;
  std::vector<ParseTree> children;
  Span span;

  [[nodiscard]] bool is_leaf() const { return !word.empty(); }
  [[nodiscard]] std::vector<std::string> leaves() const;
  /// Recomputes spans from the leaves, starting at `first`. Returns the end.
  int reindex(int first = 0);
  /// Checks that child spans partition each parent span and leaves have length 1.
  [[nodiscard]] bool spans_consistent() const;
};

/// Parses one PTB bracketed tree, e.g. "(S (NP (DT the) (NN girl)) (VP (VBZ sings)))".
/// An unlabeled outer wrapper "( (S ...) )" is stripped.
ParseTree parse_ptb(std::string_view text);
std::string to_ptb(const ParseTree& tree);

bool is_punctuation(std::string_view token);
std::string lowercase(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);
/// Joins with single spaces except before punctuation and clitics ('s, n't).
std::string detokenize(std::span<const std::string> tokens);
std::string join(std::span<const std::string> tokens, std::string_view sep = " ");

class Sentence {
 public:
  Sentence() = default;
  explicit Sentence(ParseTree tree);

  [[nodiscard]] const std::vector<std::string>& tokens() const { return tokens_; }
  /// Lower-cased copy of tokens, used by every model-facing component.
  [[nodiscard]] const std::vector<std::string>& norm() const { return norm_; }
  [[nodiscard]] const ParseTree& tree() const { return tree_; }
  [[nodiscard]] int size() const { return static_cast<int>(tokens_.size()); }
  [[nodiscard]] std::string surface() const { return detokenize(tokens_); }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::string> norm_;
  ParseTree tree_;
};

struct LabeledText {
  std::string id;
  std::vector<Sentence> sentences;
  std::string label;
  TaskKind kind = TaskKind::kSingle;

  /// Throws FormatError when the structural invariants do not hold.
  void validate() const;
  [[nodiscard]] int token_count() const;
};

struct Modifier {
  std::vector<std::string> tokens;
  ModifierType type = ModifierType::kPp;
  bool operator==(const Modifier&) const = default;
};

/// (i, j): insert after the j-th word of the i-th sentence, both 1-based;
/// j = 0 inserts before the first word.
struct Position {
  int sentence = 1;
  int word = 0;
  bool operator==(const Position&) const = default;
  auto operator<=>(const Position&) const = default;
};

struct Insertion {
  Position pos;
  Modifier modifier;
  /// Span (original coordinates) of the constituent the modifier attaches to.
  /// Used to adjoin the modifier subtree; the token result does not depend on it.
  std::optional<Span> attach;
};

/// Token sequence actually spliced in for `m` at slot `word` of `sentence`:
/// appositives and clauses gain surrounding commas unless a neighbour is
/// punctuation or the slot is a sentence boundary.
std::vector<std::string> surface_tokens(const Sentence& sentence, int word, const Modifier& m);

LabeledText insert_modifier(const LabeledText& text, Position pos, const Modifier& m);
/// Positions refer to the original text. Throws std::invalid_argument when two
/// insertions share a slot or a modifier is empty, PositionError for bad slots.
LabeledText insert_many(const LabeledText& text, std::span<const Insertion> insertions);

bool is_subsequence(std::span<const std::string> original, std::span<const std::string> expanded);
bool is_subsequence(const LabeledText& original, const LabeledText& expanded);

}  // namespace advexp
