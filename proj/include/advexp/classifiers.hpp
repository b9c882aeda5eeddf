#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "advexp/nn.hpp"
#include "advexp/target.hpp"

namespace advexp {

/// Lower-cased tokens of each sentence of a text.
std::vector<std::vector<std::string>> text_tokens(const LabeledText& text);

/// Sorted distinct gold labels.
std::vector<std::string> collect_labels(std::span<const LabeledText> data);

/// Linear softmax classifier over token counts. Pair inputs use
/// [bow(s1); bow(s2); |bow(s1) - bow(s2)|].
class BowClassifier : public TargetModel {
 public:
  struct TrainOptions {
    int epochs = 20;
    double learning_rate = 0.05;
    double l2 = 1e-3;
    std::uint64_t seed = 1;
  };

  static BowClassifier train(std::span<const LabeledText> data, const TrainOptions& options);

  [[nodiscard]] std::vector<std::string> labels() const override { return labels_; }
  [[nodiscard]] std::vector<double> predict(const LabeledText& text) const override;
  [[nodiscard]] nn::Vector features(const LabeledText& text) const;
  /// Weight of `token` for class `label` in the single-text layout; 0 if unknown.
  [[nodiscard]] double weight(const std::string& token, int label) const;

  [[nodiscard]] nlohmann::json to_json() const;
  static BowClassifier from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> labels_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  bool pair_ = false;
  nn::Matrix w_;  // C x F
  nn::Vector b_;
};

/// Embedding, width-3 convolution, ReLU, max-pool over time, linear softmax.
/// Pairs are read as one sequence joined by a separator token.
class CnnClassifier : public TargetModel {
 public:
  struct TrainOptions {
    int epochs = 6;
    int embed_dim = 16;
    int filters = 32;
    double learning_rate = 5e-3;
    std::uint64_t seed = 1;
  };

  static CnnClassifier train(std::span<const LabeledText> data, const TrainOptions& options);

  [[nodiscard]] std::vector<std::string> labels() const override { return labels_; }
  [[nodiscard]] std::vector<double> predict(const LabeledText& text) const override;
  /// Same forward pass on an autodiff tape; returns the logits node.
  nn::Var logits_on_tape(nn::Tape& tape, nn::Gradients* grads, const LabeledText& text) const;
  [[nodiscard]] const nn::ParameterSet& params() const { return params_; }

  [[nodiscard]] nlohmann::json to_json() const;
  static CnnClassifier from_json(const nlohmann::json& j);

 private:
  [[nodiscard]] std::vector<int> encode(const LabeledText& text) const;
  void register_params(int embed_dim, int filters);

  std::vector<std::string> labels_;
  std::vector<std::string> vocab_;  // <unk>, <pad>, <sep>, ...
  std::unordered_map<std::string, int> index_;
  nn::ParameterSet params_;
  int emb_ = -1, conv_w_ = -1, conv_b_ = -1, out_w_ = -1, out_b_ = -1;
};

/// Writes {"type": "bow"|"cnn", ...}.
void save_classifier(const std::filesystem::path& path, const TargetModel& model);
/// Loads a bundled classifier file written by save_classifier.
std::unique_ptr<TargetModel> load_classifier(const std::filesystem::path& path);

/// Fraction of texts whose argmax prediction equals the gold label.
double accuracy(const TargetModel& model, std::span<const LabeledText> data);

}  // namespace advexp
