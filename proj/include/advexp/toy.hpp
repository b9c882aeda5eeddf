#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "advexp/text.hpp"

namespace advexp::toy {

enum class Polarity : std::uint8_t { kPositive, kNegative, kNeutral };

/// A modifier phrase from the generator's bank.
struct BankEntry {
  ModifierType type;
  Polarity polarity;
  std::string tree;  // PTB subtree
};

const std::vector<BankEntry>& modifier_bank();
/// Lower-cased words that only occur in positive / negative bank entries or
/// core predicates.
const std::vector<std::string>& positive_words();
const std::vector<std::string>& negative_words();

struct Options {
  int sentiment_train = 600;
  int sentiment_test = 200;
  int pair_train = 600;
  int pair_test = 200;
  int corpus = 3000;
  /// Probability that an optional modifier in a sentiment text agrees with
  /// the label; the rest splits between neutral and opposite.
  double agreement = 0.7;
  double opposite = 0.1;
  std::uint64_t seed = 7;
};

struct Datasets {
  std::vector<LabeledText> sentiment_train, sentiment_test;
  std::vector<LabeledText> pair_train, pair_test;  // labels "paraphrase" / "different"
  std::vector<LabeledText> corpus;                 // unlabeled parsed sentences
};

Datasets generate(const Options& options);

}  // namespace advexp::toy
