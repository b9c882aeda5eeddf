#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "advexp/cvae.hpp"
#include "advexp/instructions.hpp"
#include "advexp/target.hpp"

namespace advexp {

enum class SearchMode : std::uint8_t { kRandom, kReinforce };

std::string_view to_string(SearchMode m);
std::optional<SearchMode> parse_search_mode(std::string_view s);

struct SearchConfig {
  int steps = 80;  // S
  double alpha = 0.01;
  double gamma = 1.0;
  double learning_rate = 1e-3;
  double baseline_decay = 0.9;
  SearchMode mode = SearchMode::kReinforce;
  /// Reuse the cached score of an expanded text already queried in the same
  /// call instead of querying again.
  bool dedup = false;

  void validate() const;
};

/// An intermediate adversarial example: the original text plus the
/// insertions applied to it so far, all in original coordinates.
struct Expansion {
  const LabeledText* original = nullptr;
  std::vector<Insertion> insertions;

  [[nodiscard]] LabeledText materialize() const;
  /// True if any of the instruction's slots is already used on this path.
  [[nodiscard]] bool occupies(const InsertionInstruction& instruction) const;
};

struct SearchCandidate {
  Modifier modifier;
  LatentCode latent;
  double adv_score = 0;  // 1 - P_M(Y | expanded)
  std::vector<double> probs;
  std::vector<Insertion> insertions;  // parent's plus the new ones
  LabeledText expanded_text;
  int step = 0;
  bool cached = false;
};

struct SearchOutcome {
  std::vector<SearchCandidate> candidates;
  long queries = 0;
  int skipped_updates = 0;
  bool budget_exhausted = false;
  std::optional<std::string> error;  // transport failure; candidates are partial
};

/// R(z) = -log(p_target + alpha).
double reward(double p_target, double alpha);

/// Trainable copy of the pretrained prior network; the generative model
/// itself is never written to.
class AdversarialPrior {
 public:
  explicit AdversarialPrior(const GenerativeModel& model);

  [[nodiscard]] GaussianParams forward(const nn::Vector& encoded_c, ModifierType t) const;
  [[nodiscard]] const nn::ParameterSet& params() const { return params_; }
  nn::ParameterSet& mutable_params() { return params_; }
  [[nodiscard]] const PriorNetIds& ids() const { return ids_; }
  [[nodiscard]] const GenerativeModel& model() const { return *model_; }

 private:
  const GenerativeModel* model_;
  nn::ParameterSet params_;
  PriorNetIds ids_{};
};

struct RegularizerValue {
  double kl = 0;         // KL(q_adv || p_G), closed form
  double type_term = 0;  // -E_{q_adv}[log P_G(t | z)], Monte-Carlo
  [[nodiscard]] double total() const { return kl + type_term; }
};

/// Lambda = KL(q_adv || p_G) - E_{q_adv}[log P_G(t | z)] with `samples`
/// reparameterized draws for the expectation.
RegularizerValue regularizer(const AdversarialPrior& adv, const nn::Vector& encoded_c, ModifierType t, int samples,
                             std::mt19937_64& rng);

/// Common inputs of one search call.
struct SearchRequest {
  const GenerativeModel* model = nullptr;
  TargetAdapter* target = nullptr;
  const InsertionInstruction* instruction = nullptr;
  const Expansion* parent = nullptr;
  int label = 0;  // index of the gold label in target->labels()
  /// Hard cap on queries for this call; negative means unlimited.
  long max_queries = -1;
  /// Modifier type for every step of the call; drawn by choose_type when unset.
  std::optional<ModifierType> type;
};

/// Samples `steps` latent codes from the prior, decodes, inserts, queries.
SearchOutcome random_search(const SearchRequest& req, const SearchConfig& cfg, std::mt19937_64& rng);
/// Fine-tunes a fresh adversarial prior with REINFORCE for `steps` updates,
/// emitting one candidate per step.
SearchOutcome reinforce_search(const SearchRequest& req, const SearchConfig& cfg, std::mt19937_64& rng);
SearchOutcome run_search(const SearchRequest& req, const SearchConfig& cfg, std::mt19937_64& rng);

/// Uniform draw from the instruction's allowed types (first draw of a call).
ModifierType choose_type(const InsertionInstruction& instruction, std::mt19937_64& rng);

}  // namespace advexp
