#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advexp/cvae.hpp"
#include "advexp/dataset.hpp"
#include "advexp/instructions.hpp"
#include "advexp/scorer.hpp"
#include "advexp/search.hpp"
#include "advexp/target.hpp"

namespace advexp {

struct AttackConfig {
  int K = 3;  // insertion budget
  int Z = 5;  // beam size
  SearchConfig search;
  /// Hard cap on target queries per example, the clean prediction included.
  std::optional<long> query_budget;
  std::uint64_t seed = 1;
  /// Run scoring calls and per-beam searches on OpenMP threads when not
  /// already inside a parallel region.
  bool parallel = true;

  void validate() const;
};

/// One intermediate adversarial example kept in the beam.
struct BeamItem {
  std::vector<Insertion> insertions;
  LabeledText text;
  std::vector<double> probs;
  double adv_score = 0;
  long order = 0;  // generation order within the attack; the original is 0
};

enum class AttackStatus : std::uint8_t { kSuccess, kFailed, kSkipped, kError };
std::string_view to_string(AttackStatus s);
std::optional<AttackStatus> parse_attack_status(std::string_view s);

struct QueryBreakdown {
  long clean = 0;
  long scoring = 0;
  long beam = 0;
  [[nodiscard]] long total() const { return clean + scoring + beam; }
};

struct AttackResult {
  std::string id;
  AttackStatus status = AttackStatus::kSkipped;
  LabeledText original;
  /// False when the target already misclassified the original; such texts
  /// are not attacked and carry status skipped.
  bool clean_correct = true;
  /// Success: the returned adversarial text. Failed: the best beam item when
  /// it carries at least one insertion.
  std::optional<LabeledText> adversarial;
  std::vector<Insertion> insertions;
  std::optional<std::string> predicted_label;
  double adv_score = 0;
  std::optional<double> perplexity;
  long queries_used = 0;
  QueryBreakdown queries;
  bool budget_exhausted = false;
  int instructions_total = 0;
  std::vector<std::string> selected;  // constituents of the selected instructions, in order
  std::vector<double> scores;         // vulnerability scores aligned with `selected`
  int steps_run = 0;
  /// Max beam adv_score: entry 0 for the original, then one per beam step.
  std::vector<double> trace;
  std::optional<std::string> error;
  std::optional<double> wall_seconds;

  [[nodiscard]] nlohmann::json to_json() const;
  static AttackResult from_json(const nlohmann::json& j);
};

/// Top-Z of old beams and new candidates by adv_score, descending; stable,
/// so earlier beams and earlier candidates win ties.
std::vector<BeamItem> beam_update(const std::vector<BeamItem>& beam, const std::vector<BeamItem>& fresh, int Z);

/// Top-K instruction indices by score, descending, document order on ties.
std::vector<std::size_t> select_instructions(const std::vector<double>& scores, int K);

/// Index of the minimum-perplexity text; the first on ties.
std::size_t finalize(const std::vector<LabeledText>& candidates, const PerplexityScorer& scorer);

/// Scoring budget K*S split over n instructions in document order: even
/// shares, remainder to the first ones, at least one step each.
std::vector<int> scoring_allocation(int n, int K, int S);

struct ScoredInstruction {
  double score = 0;  // max adv_score over the trial candidates; 0 if none
  SearchOutcome outcome;
};

/// One search call from the unmodified text with `steps` steps.
ScoredInstruction score_instruction(const InsertionInstruction& instruction, const LabeledText& text, int label,
                                    const GenerativeModel& model, TargetAdapter& target, const SearchConfig& cfg,
                                    int steps, std::uint64_t seed, long max_queries = -1);

struct AttackInputs {
  const LabeledText* text = nullptr;
  const GenerativeModel* model = nullptr;
  TargetAdapter* target = nullptr;  // dedicated to this example so its counter is per-example
  const PerplexityScorer* scorer = nullptr;
  const RuleSet* rules = nullptr;
  /// Target output on the unmodified text, already obtained through `target`.
  std::vector<double> clean_probs;
};

/// Stage 1 scoring and selection, then Stage 2 beam search with early stop
/// and perplexity finalization. The target must classify the text correctly.
AttackResult attack(const AttackInputs& in, const AttackConfig& cfg);

}  // namespace advexp
