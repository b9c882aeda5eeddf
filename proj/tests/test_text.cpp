#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "advexp/dataset.hpp"
#include "advexp/text.hpp"
#include "support.hpp"

using namespace advexp;
using advexp::test::single;

namespace {

constexpr const char* kGirl = "(S (NP (DT The) (NN girl)) (VP (VBZ writes) (NP (DT a) (NN song))) (. .))";

std::vector<std::string> toks(std::string_view s) { return split_whitespace(s); }

// Independent splice oracle: sorts slots right to left and pads appositives
// and clauses with commas next to non-punctuation neighbours.
std::vector<std::string> splice_oracle(std::vector<std::string> sent, std::vector<std::pair<int, Modifier>> ins) {
  const std::vector<std::string> orig = sent;
  std::sort(ins.begin(), ins.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  auto punct = [](const std::string& t) {
    return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) { return std::ispunct(static_cast<unsigned char>(c)); });
  };
  for (const auto& [j, m] : ins) {
    std::vector<std::string> piece;
    const bool commas = m.type == ModifierType::kAppos || m.type == ModifierType::kCl;
    if (commas && j > 0 && !punct(orig[j - 1])) piece.push_back(",");
    piece.insert(piece.end(), m.tokens.begin(), m.tokens.end());
    if (commas && j < static_cast<int>(orig.size()) && !punct(orig[j])) piece.push_back(",");
    sent.insert(sent.begin() + j, piece.begin(), piece.end());
  }
  return sent;
}

std::string random_tree(std::mt19937_64& rng, int words) {
  static const std::vector<std::string> vocab = {"the", "cat", "sat", "on", "mat", "dog", "ran", "home", "very", "fast"};
  std::string s = "(S";
  for (int i = 0; i < words; ++i) {
    if (i % 3 == 0) s += " (NP";
    s += " (NN " + vocab[rng() % vocab.size()] + ")";
    if (i % 3 == 2 || i == words - 1) s += ")";
  }
  return s + " (. .))";
}

Modifier random_modifier(std::mt19937_64& rng) {
  static const std::vector<std::string> words = {"quietly", "in", "the", "park", "who", "smiled", "a", "friend"};
  Modifier m;
  const int n = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < n; ++i) m.tokens.push_back(words[rng() % words.size()]);
  m.type = kAllModifierTypes[rng() % 4];
  return m;
}

}  // namespace

TEST(ParseTree, ReadsBracketedTreeWithSpans) {
  const auto t = parse_ptb(kGirl);
  EXPECT_EQ(t.label, "S");
  EXPECT_EQ(t.leaves(), toks("The girl writes a song ."));
  EXPECT_TRUE(t.spans_consistent());
  EXPECT_EQ(t.children[1].span, (Span{2, 5}));
  EXPECT_EQ(t.children[1].children[1].span, (Span{3, 5}));
}

TEST(ParseTree, StripsUnlabeledWrapperAndRoundTrips) {
  const auto t = parse_ptb(std::string("( ") + kGirl + " )");
  EXPECT_EQ(t.label, "S");
  EXPECT_EQ(to_ptb(parse_ptb(to_ptb(t))), to_ptb(t));
}

TEST(ParseTree, RejectsMalformedInput) {
  EXPECT_THROW(parse_ptb("(S (NP (DT The)"), FormatError);
  EXPECT_THROW(parse_ptb("S NP"), FormatError);
  EXPECT_THROW(parse_ptb(""), FormatError);
}

TEST(Text, DetokenizeGluesPunctuationAndClitics) {
  EXPECT_EQ(detokenize(toks("The girl , who sang , did n't leave .")), "The girl, who sang, didn't leave.");
  EXPECT_EQ(detokenize(toks("John 's hat")), "John's hat");
}

TEST(Text, LabeledTextInvariants) {
  LabeledText t = single(kGirl);
  EXPECT_NO_THROW(t.validate());
  t.kind = TaskKind::kPairMatched;
  EXPECT_THROW(t.validate(), FormatError);
  LabeledText empty{"e", {}, "x", TaskKind::kSingle};
  EXPECT_THROW(empty.validate(), FormatError);
}

TEST(ModifierTypeSetTest, SetAlgebra) {
  const ModifierTypeSet np{ModifierType::kPp, ModifierType::kAppos, ModifierType::kCl};
  const ModifierTypeSet has{ModifierType::kPp};
  EXPECT_EQ(np.minus(has), (ModifierTypeSet{ModifierType::kAppos, ModifierType::kCl}));
  EXPECT_EQ((np & has), has);
  EXPECT_EQ(np.size(), 3);
  EXPECT_EQ(to_string(np), "PP/APPOS/CL");
  EXPECT_TRUE(ModifierTypeSet{}.empty());
}

TEST(InsertModifier, ClauseAfterSubjectGetsCommas) {
  const auto x = single(kGirl);
  const auto y = insert_modifier(x, {1, 2}, Modifier{toks("who loves music"), ModifierType::kCl});
  EXPECT_EQ(y.sentences[0].tokens(), toks("The girl , who loves music , writes a song ."));
  EXPECT_TRUE(is_subsequence(x, y));
}

TEST(InsertModifier, AdverbAtSentenceEndIsBare) {
  const auto x = single("(S (NP (PRP She)) (VP (VBD left)))");
  const auto y = insert_modifier(x, {1, 2}, Modifier{{"yesterday"}, ModifierType::kAdvp});
  EXPECT_EQ(y.sentences[0].tokens(), toks("She left yesterday"));
  EXPECT_TRUE(is_subsequence(x, y));
}

TEST(InsertModifier, InvalidArgumentsThrow) {
  const auto x = single(kGirl);
  EXPECT_THROW(insert_modifier(x, {2, 1}, Modifier{{"a"}, ModifierType::kPp}), PositionError);
  EXPECT_THROW(insert_modifier(x, {1, 7}, Modifier{{"a"}, ModifierType::kPp}), PositionError);
  EXPECT_THROW(insert_modifier(x, {1, -1}, Modifier{{"a"}, ModifierType::kPp}), PositionError);
  EXPECT_THROW(insert_modifier(x, {1, 2}, Modifier{{}, ModifierType::kPp}), std::invalid_argument);
}

TEST(InsertMany, MatchedPairGetsIdenticalModifier) {
  const auto x = test::pair(kGirl, "(S (NP (DT The) (NN girl)) (VP (VBZ composes) (NP (DT a) (NN song))) (. .))",
                            "paraphrase", TaskKind::kPairMatched);
  const Modifier m{toks("in the red dress"), ModifierType::kPp};
  const std::vector<Insertion> ins{{{1, 2}, m, Span{0, 2}}, {{2, 2}, m, Span{0, 2}}};
  const auto y = insert_many(x, ins);
  EXPECT_EQ(y.sentences[0].tokens(), toks("The girl in the red dress writes a song ."));
  EXPECT_EQ(y.sentences[1].tokens(), toks("The girl in the red dress composes a song ."));
}

TEST(InsertMany, EmptyListIsIdentity) {
  const auto x = single(kGirl);
  const auto y = insert_many(x, {});
  EXPECT_EQ(y.sentences[0].tokens(), x.sentences[0].tokens());
  EXPECT_EQ(to_ptb(y.sentences[0].tree()), to_ptb(x.sentences[0].tree()));
}

TEST(InsertMany, DuplicateSlotThrows) {
  const auto x = single(kGirl);
  const Modifier m{{"here"}, ModifierType::kAdvp};
  const std::vector<Insertion> ins{{{1, 2}, m, {}}, {{1, 2}, m, {}}};
  EXPECT_THROW(insert_many(x, ins), std::invalid_argument);
}

TEST(InsertMany, TwoSlotsEqualSpliceOracle) {
  const auto x = single(kGirl);
  const Modifier a{toks("a local singer"), ModifierType::kAppos};
  const Modifier b{toks("every day"), ModifierType::kAdvp};
  const std::vector<Insertion> ins{{{1, 2}, a, {}}, {{1, 5}, b, {}}};
  const auto y = insert_many(x, ins);
  EXPECT_EQ(y.sentences[0].tokens(), splice_oracle(x.sentences[0].tokens(), {{2, a}, {5, b}}));
  EXPECT_EQ(y.sentences[0].tokens(), toks("The girl , a local singer , writes a song every day ."));
}

TEST(InsertMany, AttachedModifierBecomesSiblingOfTarget) {
  const auto x = single(kGirl);
  const std::vector<Insertion> ins{{{1, 2}, Modifier{toks("in red"), ModifierType::kPp}, Span{0, 2}}};
  const auto y = insert_many(x, ins);
  const auto& np = y.sentences[0].tree().children[0];
  EXPECT_EQ(np.label, "NP");
  EXPECT_EQ(np.leaves(), toks("The girl in red"));
  EXPECT_TRUE(y.sentences[0].tree().spans_consistent());
}

TEST(IsSubsequence, Definitional) {
  EXPECT_TRUE(is_subsequence(toks("a b c"), toks("a q b c")));
  EXPECT_FALSE(is_subsequence(toks("a b c"), toks("a c")));
  EXPECT_TRUE(is_subsequence(toks("a b"), toks("a b")));
  const auto x = single(kGirl);
  EXPECT_TRUE(is_subsequence(x, x));
  const auto two = test::pair(kGirl, kGirl, "paraphrase", TaskKind::kPairMatched);
  EXPECT_FALSE(is_subsequence(x, two));
}

// Property sweep: random trees, slots and modifiers.
TEST(InsertionProperties, RandomInsertionsPreserveOriginalAndCountTokens) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 500; ++trial) {
    const int words = 1 + static_cast<int>(rng() % 8);
    const auto x = single(random_tree(rng, words));
    const int n = x.sentences[0].size();
    std::vector<Insertion> ins;
    std::vector<std::pair<int, Modifier>> oracle_in;
    std::vector<int> slots(static_cast<std::size_t>(n + 1));
    std::iota(slots.begin(), slots.end(), 0);
    std::shuffle(slots.begin(), slots.end(), rng);
    const int k = 1 + static_cast<int>(rng() % std::min(3, n + 1));
    std::size_t added = 0;
    for (int i = 0; i < k; ++i) {
      Modifier m = random_modifier(rng);
      added += surface_tokens(x.sentences[0], slots[static_cast<std::size_t>(i)], m).size();
      ins.push_back({{1, slots[static_cast<std::size_t>(i)]}, m, {}});
      oracle_in.emplace_back(slots[static_cast<std::size_t>(i)], m);
    }
    const auto y = insert_many(x, ins);
    ASSERT_TRUE(is_subsequence(x, y)) << trial;
    ASSERT_EQ(y.sentences[0].tokens(), splice_oracle(x.sentences[0].tokens(), oracle_in)) << trial;
    ASSERT_EQ(static_cast<std::size_t>(y.token_count()), static_cast<std::size_t>(x.token_count()) + added);
    ASSERT_TRUE(y.sentences[0].tree().spans_consistent());
    ASSERT_EQ(y.sentences[0].tree().leaves(), y.sentences[0].tokens());
  }
}

TEST(Dataset, JsonRoundTrip) {
  auto x = test::pair(kGirl, "(S (NP (PRP She)) (VP (VBD left)) (. .))", "different", TaskKind::kPairUnmatched, "id7");
  const auto j = text_to_json(x);
  EXPECT_EQ(j["sentences"][0], "The girl writes a song .");
  EXPECT_EQ(j["task_kind"], "pair_unmatched");
  const auto y = text_from_json(j);
  EXPECT_EQ(y.id, "id7");
  EXPECT_EQ(y.kind, TaskKind::kPairUnmatched);
  EXPECT_EQ(y.sentences[1].tokens(), x.sentences[1].tokens());
}

TEST(Dataset, PairKindResolvedThroughMapping) {
  nlohmann::json j = {{"id", "a"},
                      {"sentences", {"She left .", "She went away ."}},
                      {"trees", {"(S (NP (PRP She)) (VP (VBD left)) (. .))",
                                 "(S (NP (PRP She)) (VP (VBD went) (ADVP (RB away))) (. .))"}},
                      {"label", "entailment"},
                      {"task_kind", "pair"}};
  const PairLabelMapping mapping{{"entailment"}};
  EXPECT_EQ(text_from_json(j, &mapping).kind, TaskKind::kPairMatched);
  j["label"] = "neutral";
  EXPECT_EQ(text_from_json(j, &mapping).kind, TaskKind::kPairUnmatched);
  EXPECT_THROW(text_from_json(j), FormatError);
}

TEST(Dataset, RejectsLeafMismatch) {
  nlohmann::json j = {{"sentences", {"She stayed ."}}, {"trees", {"(S (NP (PRP She)) (VP (VBD left)) (. .))"}},
                      {"label", "x"}};
  EXPECT_THROW(text_from_json(j), FormatError);
}

TEST(Dataset, GeneratedToyTreesAreConsistent) {
  const auto& d = test::toy_data();
  for (const auto* set : {&d.sentiment_train, &d.pair_test, &d.corpus})
    for (const auto& t : *set) {
      ASSERT_NO_THROW(t.validate());
      for (const auto& s : t.sentences) ASSERT_EQ(s.tree().leaves(), s.tokens());
    }
}
