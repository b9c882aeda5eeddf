#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "advexp/nn.hpp"
#include "advexp/rules.hpp"
#include "advexp/text.hpp"

namespace advexp {

/// (c, t, m) extracted from a parsed sentence; tokens are lower-cased.
struct TrainingTriple {
  std::vector<std::string> constituent;
  ModifierType type = ModifierType::kPp;
  std::vector<std::string> modifier;
  bool operator==(const TrainingTriple&) const = default;
};

/// Runs the template rules in reverse: every attached modifier the rules
/// could have inserted becomes one triple (single-word preterminal modifiers
/// excepted), with c = the node's tokens minus
/// the modifier and its delimiting commas.
std::vector<TrainingTriple> extract_training_triples(const Sentence& sentence,
                                                     const RuleSet& rules = RuleSet::default_rules());
std::vector<TrainingTriple> extract_training_triples(std::span<const LabeledText> corpus,
                                                     const RuleSet& rules = RuleSet::default_rules());

class Vocabulary {
 public:
  static constexpr int kUnk = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;

  Vocabulary();
  /// Tokens with count >= min_freq, ordered by (count desc, token asc).
  static Vocabulary build(std::span<const TrainingTriple> triples, int min_freq);
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  [[nodiscard]] int id(const std::string& token) const;
  [[nodiscard]] const std::string& token(int id) const { return tokens_[static_cast<std::size_t>(id)]; }
  [[nodiscard]] int size() const { return static_cast<int>(tokens_.size()); }
  [[nodiscard]] const std::vector<std::string>& tokens() const { return tokens_; }
  [[nodiscard]] std::vector<int> encode(std::span<const std::string> tokens) const;

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

struct CvaeConfig {
  int embed_dim = 64;
  int hidden = 128;
  int latent = 32;
  int type_dim = 16;
  int max_decode_len = 16;
  int min_freq = 2;
  double init_scale = 0.08;
};

struct GaussianParams {
  nn::Vector mean;
  nn::Vector log_variance;
};

struct LatentCode {
  nn::Vector z;
};

/// Closed-form KL(q || p) between diagonal Gaussians, summed over dimensions.
double kl_gaussians(const GaussianParams& q, const GaussianParams& p);

/// Parameter ids of a prior-shaped network (encoded c and type embedding ->
/// Gaussian). Shared by the pretrained prior and the adversarial prior.
struct PriorNetIds {
  int w1, b1, w_mu, b_mu, w_lv, b_lv;
};

struct LossParts {
  double reconstruction = 0;  // summed token NLL (nats)
  double kl = 0;
  double type = 0;            // -log P(t | z)
  int tokens = 0;             // predicted tokens, EOS included
};

/// Term weights of the pretraining objective recon + kl_weight * KL + type.
/// The KL term contributes no gradient while it is below free_bits.
struct LossWeights {
  double kl_weight = 1.0;
  double free_bits = 0.0;
};

class GenerativeModel {
 public:
  GenerativeModel(CvaeConfig config, Vocabulary vocab, std::string rules_hash, std::uint64_t seed);

  [[nodiscard]] const CvaeConfig& config() const { return config_; }
  [[nodiscard]] const Vocabulary& vocab() const { return vocab_; }
  [[nodiscard]] const std::string& rules_hash() const { return rules_hash_; }
  [[nodiscard]] const nn::ParameterSet& params() const { return params_; }
  nn::ParameterSet& mutable_params() { return params_; }
  [[nodiscard]] const PriorNetIds& prior_ids() const { return prior_; }

  /// Bidirectional encoding of a token sequence: [forward final; backward final].
  [[nodiscard]] nn::Vector encode(std::span<const std::string> tokens) const;
  [[nodiscard]] nn::Vector type_embedding(ModifierType t) const;
  [[nodiscard]] GaussianParams prior(const nn::Vector& encoded_c, ModifierType t) const;
  [[nodiscard]] GaussianParams prior(std::span<const std::string> c, ModifierType t) const;
  [[nodiscard]] GaussianParams posterior(std::span<const std::string> c, ModifierType t,
                                         std::span<const std::string> m) const;
  /// P_G(t | z) over the four modifier types.
  [[nodiscard]] nn::Vector type_probs(const nn::Vector& z) const;

  /// n reparameterized draws mu + sigma * eps from p_G(z | c, t).
  [[nodiscard]] std::vector<LatentCode> sample_prior(std::span<const std::string> c, ModifierType t, int n,
                                                     std::mt19937_64& rng) const;

  /// Greedy approximation of argmax_m P_G(m | c, t, z). The end token is
  /// suppressed at the first step so the modifier is never empty.
  [[nodiscard]] Modifier decode(const nn::Vector& encoded_c, ModifierType t, const nn::Vector& z) const;
  [[nodiscard]] Modifier decode(std::span<const std::string> c, ModifierType t, const nn::Vector& z) const;

  /// Single-example loss with a fixed posterior noise vector; when `grads` is
  /// non-null, the gradient of the weighted objective (see LossWeights) is
  /// accumulated into it.
  LossParts example_loss(const TrainingTriple& triple, const nn::Vector& eps, nn::Gradients* grads,
                         const LossWeights& weights = {}) const;

  /// Prior-shaped network on a tape; used for the pretrained prior and for
  /// adversarial copies of it.
  static std::pair<nn::Var, nn::Var> prior_on_tape(nn::Tape& tape, const nn::ParameterSet& params,
                                                   const PriorNetIds& ids, nn::Gradients* grads,
                                                   nn::Var encoded_c, nn::Var type_embedding);
  /// -log P_G(t | z) on a tape with the type head frozen.
  nn::Var type_nll_on_tape(nn::Tape& tape, nn::Var z, ModifierType t) const;

  void save(const std::filesystem::path& path) const;
  static GenerativeModel load(const std::filesystem::path& path);

 private:
  struct EncoderIds {
    int w, u, b;
  };
  void build_parameters();
  nn::Var encode_on_tape(nn::Tape& tape, nn::Gradients* grads, std::span<const int> ids) const;
  nn::ParamRef ref(nn::Gradients* grads, int id) const;

  CvaeConfig config_;
  Vocabulary vocab_;
  std::string rules_hash_;
  nn::ParameterSet params_;

  int embedding_ = -1, type_table_ = -1;
  EncoderIds enc_fwd_{}, enc_bwd_{}, dec_{};
  PriorNetIds prior_{}, post_{};
  int init_w_ = -1, init_b_ = -1, out_w_ = -1, out_b_ = -1, type_w_ = -1, type_b_ = -1;
};

/// Mean losses over a batch, one posterior sample per example.
struct BatchLoss {
  double l1 = 0;  // reconstruction + KL
  double l2 = 0;  // type reconstruction
  double reconstruction = 0;
  double kl = 0;
  double nll_per_token = 0;
};

/// Evaluates the batch with noise drawn in order from `rng`; no gradients.
BatchLoss elbo_loss(const GenerativeModel& model, std::span<const TrainingTriple> batch, std::mt19937_64& rng);
double type_loss(const GenerativeModel& model, std::span<const TrainingTriple> batch, std::mt19937_64& rng);

/// Mean-loss gradient over a batch for fixed per-example noise. The serial
/// kernel is the reference; the parallel one splits examples over OpenMP
/// threads and reduces per-thread buffers in thread order.
BatchLoss batch_gradients_serial(const GenerativeModel& model, std::span<const TrainingTriple> batch,
                                 std::span<const nn::Vector> eps, nn::Gradients& grads,
                                 const LossWeights& weights = {});
BatchLoss batch_gradients_parallel(const GenerativeModel& model, std::span<const TrainingTriple> batch,
                                   std::span<const nn::Vector> eps, nn::Gradients& grads,
                                   const LossWeights& weights = {});

struct PretrainOptions {
  int steps = 2000;
  int batch_size = 32;
  double learning_rate = 2e-3;
  double clip_norm = 5.0;
  /// Linear KL warm-up length in steps; 0 keeps the weight at 1.
  int kl_anneal_steps = 0;
  /// KL budget in nats per example below which the KL term is not penalised.
  double free_bits = 0.0;
  std::uint64_t seed = 1;
  bool parallel = true;
  std::function<void(int step, const BatchLoss&)> on_step;
};

GenerativeModel pretrain(std::span<const TrainingTriple> triples, const CvaeConfig& config,
                         const PretrainOptions& options, const RuleSet& rules = RuleSet::default_rules());

}  // namespace advexp
