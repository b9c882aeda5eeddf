#include "advexp/search.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <stdexcept>

#include "advexp/log.hpp"

namespace advexp {

using nn::Vector;

std::string_view to_string(SearchMode m) { return m == SearchMode::kRandom ? "random" : "reinforce"; }

std::optional<SearchMode> parse_search_mode(std::string_view s) {
  if (s == "random") return SearchMode::kRandom;
  if (s == "reinforce") return SearchMode::kReinforce;
  return std::nullopt;
}

void SearchConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("search steps S must be >= 1");
  if (!(alpha > 0)) throw std::invalid_argument("alpha must be > 0");
  if (gamma < 0) throw std::invalid_argument("gamma must be >= 0");
  if (!(learning_rate > 0)) throw std::invalid_argument("learning rate must be > 0");
  if (baseline_decay < 0 || baseline_decay >= 1) throw std::invalid_argument("baseline decay must be in [0, 1)");
}

LabeledText Expansion::materialize() const { return insert_many(*original, insertions); }

bool Expansion::occupies(const InsertionInstruction& instruction) const {
  for (const auto& ins : insertions) {
    for (std::size_t k = 0; k < instruction.positions.size(); ++k) {
      if (ins.pos == instruction.positions[k]) return true;
      if (ins.attach && ins.pos.sentence == instruction.targets[k].sentence && *ins.attach == instruction.targets[k].span)
        return true;
    }
  }
  return false;
}

double reward(double p_target, double alpha) {
  if (!(p_target >= 0.0 && p_target <= 1.0)) throw std::invalid_argument("reward: probability outside [0, 1]");
  if (!(p_target + alpha > 0.0)) throw std::invalid_argument("reward: p + alpha must be > 0");
  return -std::log(p_target + alpha);
}

ModifierType choose_type(const InsertionInstruction& instruction, std::mt19937_64& rng) {
  const auto types = instruction.allowed_types.to_vector();
  if (types.empty()) throw std::invalid_argument("instruction has no allowed modifier types");
  return types[static_cast<std::size_t>(rng() % types.size())];
}

// ---------------------------------------------------------------------------
// Adversarial prior

AdversarialPrior::AdversarialPrior(const GenerativeModel& model) : model_(&model) {
  const auto& src = model.params();
  const auto& p = model.prior_ids();
  auto copy = [&](int id) {
    const auto& t = src.all()[static_cast<std::size_t>(id)];
    const int mine = params_.add(t.name, t.value.rows(), t.value.cols());
    params_.value(mine) = t.value;
    return mine;
  };
  ids_ = PriorNetIds{copy(p.w1), copy(p.b1), copy(p.w_mu), copy(p.b_mu), copy(p.w_lv), copy(p.b_lv)};
}

GaussianParams AdversarialPrior::forward(const Vector& encoded_c, ModifierType t) const {
  Vector in(encoded_c.size() + model_->config().type_dim);
  in << encoded_c, model_->type_embedding(t);
  Vector h = (params_.value(ids_.w1) * in + params_.value(ids_.b1).col(0)).array().tanh().matrix();
  return {params_.value(ids_.w_mu) * h + params_.value(ids_.b_mu).col(0),
          params_.value(ids_.w_lv) * h + params_.value(ids_.b_lv).col(0)};
}

RegularizerValue regularizer(const AdversarialPrior& adv, const Vector& encoded_c, ModifierType t, int samples,
                             std::mt19937_64& rng) {
  if (samples < 1) throw std::invalid_argument("regularizer: samples must be >= 1");
  const auto q = adv.forward(encoded_c, t);
  const auto p = adv.model().prior(encoded_c, t);
  RegularizerValue out;
  out.kl = kl_gaussians(q, p);
  const Vector sigma = (0.5 * q.log_variance.array()).exp().matrix();
  const int ti = static_cast<int>(t);
  double acc = 0;
  for (int i = 0; i < samples; ++i) {
    Vector z = q.mean + (sigma.array() * nn::standard_normal(rng, q.mean.size()).array()).matrix();
    acc -= std::log(adv.model().type_probs(z)(ti));
  }
  out.type_term = acc / samples;
  return out;
}

// ---------------------------------------------------------------------------
// Search calls

namespace {

std::string text_key(const LabeledText& t) {
  std::string key;
  for (const auto& s : t.sentences) {
    key += join(s.tokens());
    key += '\x1f';
  }
  return key;
}

// Queries the target for one call: budget, optional dedup cache, transport errors.
class CallScorer {
 public:
  CallScorer(const SearchRequest& req, bool dedup, SearchOutcome& out) : req_(req), dedup_(dedup), out_(out) {}

  // Empty when the call must stop (budget or transport failure).
  std::optional<std::vector<double>> score(const LabeledText& text, bool& cached) {
    cached = false;
    std::string key;
    if (dedup_) {
      key = text_key(text);
      if (auto it = cache_.find(key); it != cache_.end()) {
        cached = true;
        return it->second;
      }
    }
    if (req_.max_queries >= 0 && out_.queries >= req_.max_queries) {
      out_.budget_exhausted = true;
      return std::nullopt;
    }
    try {
      ++out_.queries;
      auto probs = req_.target->predict(text);
      if (dedup_) cache_.emplace(std::move(key), probs);
      return probs;
    } catch (const AdapterError& e) {
      out_.error = e.what();
      return std::nullopt;
    }
  }

 private:
  const SearchRequest& req_;
  bool dedup_;
  SearchOutcome& out_;
  std::map<std::string, std::vector<double>> cache_;
};

ModifierType check_request(const SearchRequest& req, std::mt19937_64& rng) {
  if (!req.model || !req.target || !req.instruction || !req.parent || !req.parent->original)
    throw std::invalid_argument("incomplete search request");
  if (req.instruction->positions.size() != req.instruction->targets.size())
    throw std::invalid_argument("instruction positions and targets differ in length");
  if (!req.type) return choose_type(*req.instruction, rng);
  if (!req.instruction->allowed_types.contains(*req.type))
    throw std::invalid_argument("requested modifier type is not allowed by the instruction");
  return *req.type;
}

// Builds the candidate for `modifier` without its score.
SearchCandidate expand(const SearchRequest& req, Modifier modifier, Vector z, int step) {
  SearchCandidate c;
  c.step = step;
  c.latent.z = std::move(z);
  c.insertions = req.parent->insertions;
  for (std::size_t k = 0; k < req.instruction->positions.size(); ++k)
    c.insertions.push_back(Insertion{req.instruction->positions[k], modifier, req.instruction->targets[k].span});
  c.modifier = std::move(modifier);
  c.expanded_text = insert_many(*req.parent->original, c.insertions);
  return c;
}

}  // namespace

SearchOutcome random_search(const SearchRequest& req, const SearchConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const ModifierType t = check_request(req, rng);
  SearchOutcome out;
  CallScorer scorer(req, cfg.dedup, out);
  const auto c_tokens = req.instruction->constituent_norm();
  const Vector enc = req.model->encode(c_tokens);
  const GaussianParams g = req.model->prior(enc, t);
  for (int step = 0; step < cfg.steps; ++step) {
    Vector z = g.mean + ((0.5 * g.log_variance.array()).exp() * nn::standard_normal(rng, g.mean.size()).array()).matrix();
    Modifier m = req.model->decode(enc, t, z);
    auto cand = expand(req, std::move(m), std::move(z), step);
    bool cached = false;
    auto probs = scorer.score(cand.expanded_text, cached);
    if (!probs) break;
    cand.cached = cached;
    cand.probs = std::move(*probs);
    cand.adv_score = 1.0 - cand.probs[static_cast<std::size_t>(req.label)];
    out.candidates.push_back(std::move(cand));
  }
  return out;
}

SearchOutcome reinforce_search(const SearchRequest& req, const SearchConfig& cfg, std::mt19937_64& rng) {
  cfg.validate();
  const ModifierType t = check_request(req, rng);
  SearchOutcome out;
  CallScorer scorer(req, cfg.dedup, out);
  const GenerativeModel& model = *req.model;
  const auto c_tokens = req.instruction->constituent_norm();
  const Vector enc = model.encode(c_tokens);
  const auto prior_p = model.prior(enc, t);

  AdversarialPrior adv(model);
  nn::Gradients grads(adv.params());
  nn::Adam adam(cfg.learning_rate);
  std::optional<double> baseline;

  for (int step = 0; step < cfg.steps; ++step) {
    nn::Tape tape;
    grads.zero();
    nn::Var enc_v = tape.constant(enc);
    nn::Var temb = tape.constant(model.type_embedding(t));
    auto [mu, lv] = GenerativeModel::prior_on_tape(tape, adv.params(), adv.ids(), &grads, enc_v, temb);
    const Vector eps = nn::standard_normal(rng, model.config().latent);
    Vector z = tape.value(mu) + ((0.5 * tape.value(lv).array()).exp() * eps.array()).matrix();

    auto cand = expand(req, model.decode(enc, t, z), z, step);
    bool cached = false;
    auto probs = scorer.score(cand.expanded_text, cached);
    if (!probs) break;
    cand.cached = cached;
    cand.probs = std::move(*probs);
    const double p_target = cand.probs[static_cast<std::size_t>(req.label)];
    cand.adv_score = 1.0 - p_target;
    out.candidates.push_back(std::move(cand));

    const double r = reward(p_target, cfg.alpha);
    if (!baseline) baseline = r;
    const double advantage = r - *baseline;

    nn::Var mu_p = tape.constant(prior_p.mean);
    nn::Var lv_p = tape.constant(prior_p.log_variance);
    nn::Var log_q = tape.gaussian_logpdf(mu, lv, z);
    nn::Var kl = tape.kl_diag(mu, lv, mu_p, lv_p);
    nn::Var type_nll = model.type_nll_on_tape(tape, tape.reparam(mu, lv, eps), t);
    nn::Var loss = tape.weighted_sum({{log_q, -advantage}, {kl, cfg.gamma}, {type_nll, cfg.gamma}});

    if (!std::isfinite(tape.scalar(loss)) || !std::isfinite(r)) {
      ++out.skipped_updates;
      adam.set_lr(adam.lr() * 0.5);
      char lr[32];
      std::snprintf(lr, sizeof lr, "%g", adam.lr());
      log::warn("reinforce: non-finite loss at step " + std::to_string(step) + ", update skipped, lr halved to " + lr);
    } else {
      tape.backward(loss);
      if (std::isfinite(grads.norm())) {
        adam.step(adv.mutable_params(), grads);
      } else {
        ++out.skipped_updates;
        adam.set_lr(adam.lr() * 0.5);
        log::warn("reinforce: non-finite gradient at step " + std::to_string(step) + ", update skipped");
      }
    }
    *baseline = cfg.baseline_decay * *baseline + (1.0 - cfg.baseline_decay) * r;
  }
  return out;
}

SearchOutcome run_search(const SearchRequest& req, const SearchConfig& cfg, std::mt19937_64& rng) {
  return cfg.mode == SearchMode::kRandom ? random_search(req, cfg, rng) : reinforce_search(req, cfg, rng);
}

}  // namespace advexp
