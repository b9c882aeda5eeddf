#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "advexp/cvae.hpp"
#include "advexp/target.hpp"
#include "advexp/text.hpp"
#include "advexp/toy.hpp"

namespace advexp::test {

std::filesystem::path fixture(std::string_view name);

LabeledText single(std::string_view ptb, std::string label = "positive", std::string id = "t");
LabeledText pair(std::string_view ptb1, std::string_view ptb2, std::string label, TaskKind kind,
                 std::string id = "p");

/// Small generated datasets, built once per process.
const toy::Datasets& toy_data();
/// A small CVAE pretrained on toy_data().corpus, built once per process.
const GenerativeModel& tiny_model();
CvaeConfig tiny_config();

/// Node with the given span and category (function tags ignored), or null.
const ParseTree* find_node(const ParseTree& t, Span span, std::string_view label);
/// Modifier types already attached to `n`, read off its children directly.
ModifierTypeSet oracle_existing(const ParseTree& n);

/// Same probabilities for every input.
class ConstantTarget : public TargetModel {
 public:
  ConstantTarget(std::vector<std::string> labels, std::vector<double> probs)
      : labels_(std::move(labels)), probs_(std::move(probs)) {}
  [[nodiscard]] std::vector<std::string> labels() const override { return labels_; }
  [[nodiscard]] std::vector<double> predict(const LabeledText&) const override { return probs_; }

 private:
  std::vector<std::string> labels_;
  std::vector<double> probs_;
};

/// Two-class target: P(label 0) = sigmoid(bias - slope * #trigger tokens).
class TriggerTarget : public TargetModel {
 public:
  TriggerTarget(std::set<std::string> triggers, double bias = 3.0, double slope = 4.0)
      : triggers_(std::move(triggers)), bias_(bias), slope_(slope) {}
  [[nodiscard]] std::vector<std::string> labels() const override { return {"positive", "negative"}; }
  [[nodiscard]] std::vector<double> predict(const LabeledText& text) const override;

 private:
  std::set<std::string> triggers_;
  double bias_, slope_;
};

/// Throws AdapterError on the n-th call (1-based) and after.
class FailingTarget : public TargetModel {
 public:
  FailingTarget(const TargetModel& inner, long fail_from) : inner_(inner), fail_from_(fail_from) {}
  [[nodiscard]] std::vector<std::string> labels() const override { return inner_.labels(); }
  [[nodiscard]] std::vector<double> predict(const LabeledText& text) const override;
  [[nodiscard]] bool concurrent() const override { return false; }

 private:
  const TargetModel& inner_;
  long fail_from_;
  mutable long calls_ = 0;
};

}  // namespace advexp::test
