#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "advexp/target.hpp"

namespace advexp {

/// Fluency score of a text; lower is more fluent.
class PerplexityScorer {
 public:
  virtual ~PerplexityScorer() = default;
  [[nodiscard]] virtual double score(const LabeledText& text) const = 0;
  [[nodiscard]] virtual bool concurrent() const { return true; }
};

struct NgramWeights {
  double trigram = 0.6;
  double bigram = 0.3;
  double unigram = 0.1;
};

/// Lower-cased trigram model with Jelinek-Mercer interpolation:
///   P(w | u v) = l3 c(u v w)/c(u v .) + l2 c(v w)/c(v .) + l1 (c(w) + 1)/(N + V)
/// Each sentence is padded as <s> <s> w1 .. wn </s>; ratios with an unseen
/// history contribute 0. V counts the seen types plus one unknown slot.
class NgramScorer : public PerplexityScorer {
 public:
  using Weights = NgramWeights;

  static NgramScorer train(std::span<const std::vector<std::string>> sentences, Weights weights = {});
  static NgramScorer train(std::span<const LabeledText> corpus, Weights weights = {});

  /// exp(mean negative log-probability per predicted token, </s> included).
  [[nodiscard]] double perplexity(std::span<const std::vector<std::string>> sentences) const;
  [[nodiscard]] double score(const LabeledText& text) const override;
  [[nodiscard]] double prob(const std::string& u, const std::string& v, const std::string& w) const;

  [[nodiscard]] nlohmann::json to_json() const;
  static NgramScorer from_json(const nlohmann::json& j);
  void save(const std::filesystem::path& path) const;
  static NgramScorer load(const std::filesystem::path& path);

 private:
  Weights weights_;
  std::map<std::string, long> uni_;
  std::map<std::string, long> bi_, bi_hist_;   // "v w", "v"
  std::map<std::string, long> tri_, tri_hist_;  // "u v w", "u v"
  long total_ = 0;
};

/// Scorer behind a LineChannel: {"text": ...} -> {"perplexity": x}.
class ExternalScorer : public PerplexityScorer {
 public:
  explicit ExternalScorer(const std::string& endpoint);
  [[nodiscard]] double score(const LabeledText& text) const override;
  [[nodiscard]] bool concurrent() const override { return false; }

 private:
  std::unique_ptr<LineChannel> channel_;
};

}  // namespace advexp
