#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "advexp/orchestrator.hpp"

namespace advexp {

struct HarnessInputs {
  const GenerativeModel* model = nullptr;
  const TargetModel* target = nullptr;
  const PerplexityScorer* scorer = nullptr;
  const RuleSet* rules = nullptr;
};

struct RunOptions {
  AttackConfig attack;
  /// OpenMP threads for the per-example fan-out; 0 keeps the runtime default.
  int workers = 0;
  /// Record per-example wall time (makes the output run-dependent).
  bool timing = false;
  std::function<void(const AttackResult&)> on_result;
};

/// Attacks one example at dataset position `index`: a clean query on a fresh
/// adapter, then attack() for correctly classified texts.
AttackResult attack_example(const LabeledText& text, std::size_t index, const HarnessInputs& in,
                            const RunOptions& options);

/// Reference implementation: examples one after another.
std::vector<AttackResult> run_attacks_serial(std::span<const LabeledText> data, const HarnessInputs& in,
                                             const RunOptions& options);
/// Examples spread over OpenMP threads; output identical to the serial run.
std::vector<AttackResult> run_attacks(std::span<const LabeledText> data, const HarnessInputs& in,
                                      const RunOptions& options);

struct EvalMetrics {
  long examples = 0;      // records without transport errors
  long errors = 0;
  long clean_correct = 0;
  long attacked = 0;      // clean-correct texts with at least one instruction
  long successes = 0;
  long failed = 0;
  long skipped = 0;       // clean-correct texts without instructions
  double orig_accuracy = 0;
  double adv_accuracy = 0;
  double attack_success_rate = 0;  // successes / clean_correct
  std::optional<double> avg_adv_length;
  std::optional<double> avg_orig_length_of_successes;
  std::optional<double> orig_accuracy_on_long;
  long long_examples = 0;
  double mean_queries = 0;          // over clean-correct texts
  double mean_scoring_queries = 0;
  double mean_beam_queries = 0;
  long max_queries = 0;
  double skipped_fraction = 0;      // skipped / clean_correct
  std::optional<double> mean_perplexity;

  [[nodiscard]] nlohmann::json to_json() const;
};

EvalMetrics evaluate(std::span<const AttackResult> results);

struct UnionReport {
  long examples = 0;
  double orig_accuracy = 0;
  double adv_accuracy_a = 0;
  double adv_accuracy_b = 0;
  double adv_accuracy_union = 0;
  [[nodiscard]] nlohmann::json to_json() const;
};

/// Records need "id" and "status"; "clean_correct" defaults to true. Both
/// sets must cover the same ids exactly.
UnionReport union_success(std::span<const nlohmann::json> a, std::span<const nlohmann::json> b);

struct AugmentReport {
  long original = 0;
  long added = 0;
  long skipped = 0;
};

/// Copies every training line verbatim, then appends one record per
/// successful result whose id and gold label match a training record. The
/// appended record is the adversarial text with the original label plus
/// provenance ("source_id", "insertions").
AugmentReport export_augmented(const std::filesystem::path& train, std::span<const AttackResult> results,
                               const std::filesystem::path& out);

}  // namespace advexp
