#include "advexp/cvae.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "advexp/instructions.hpp"

namespace advexp {

using nn::Gradients;
using nn::Matrix;
using nn::ParamRef;
using nn::Tape;
using nn::Var;
using nn::Vector;

// ---------------------------------------------------------------------------
// Triple extraction

namespace {

bool is_comma(const ParseTree& n) { return n.is_leaf() && n.word == ","; }

}  // namespace

std::vector<TrainingTriple> extract_training_triples(const Sentence& sentence, const RuleSet& rules) {
  std::vector<TrainingTriple> out;
  const auto& toks = sentence.norm();
  for (const auto& e : expandable_nodes(sentence.tree(), rules)) {
    const auto& kids = e.node->children;
    for (const auto& m : attached_modifiers(*e.node, *e.rule)) {
      // Bare adverbs ("not") block insertion but are not sampled as modifiers.
      if (!e.rule->types.contains(m.type) || kids[m.child_index].is_leaf()) continue;
      std::vector<bool> removed(toks.size(), false);
      auto drop = [&removed](Span s) {
        for (int k = s.start; k < s.end; ++k) removed[static_cast<std::size_t>(k)] = true;
      };
      drop(m.span);
      if (m.child_index > 0 && is_comma(kids[m.child_index - 1])) drop(kids[m.child_index - 1].span);
      if (m.child_index + 1 < kids.size() && is_comma(kids[m.child_index + 1])) drop(kids[m.child_index + 1].span);

      TrainingTriple t;
      t.type = m.type;
      for (int k = e.node->span.start; k < e.node->span.end; ++k)
        if (!removed[static_cast<std::size_t>(k)]) t.constituent.push_back(toks[static_cast<std::size_t>(k)]);
      while (!t.constituent.empty() && is_punctuation(t.constituent.back())) t.constituent.pop_back();
      for (int k = m.span.start; k < m.span.end; ++k) t.modifier.push_back(toks[static_cast<std::size_t>(k)]);
      while (!t.modifier.empty() && t.modifier.back() == ",") t.modifier.pop_back();
      while (!t.modifier.empty() && t.modifier.front() == ",") t.modifier.erase(t.modifier.begin());
      if (!t.constituent.empty() && !t.modifier.empty()) out.push_back(std::move(t));
    }
  }
  return out;
}

std::vector<TrainingTriple> extract_training_triples(std::span<const LabeledText> corpus, const RuleSet& rules) {
  std::vector<TrainingTriple> out;
  for (const auto& text : corpus)
    for (const auto& s : text.sentences) {
      auto part = extract_training_triples(s, rules);
      out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
    }
  return out;
}

// ---------------------------------------------------------------------------
// Vocabulary

Vocabulary::Vocabulary() : tokens_{"<unk>", "<s>", "</s>"} {
  for (std::size_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], static_cast<int>(i));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  for (auto& t : tokens)
    if (t != "<unk>" && t != "<s>" && t != "</s>") v.tokens_.push_back(std::move(t));
  v.index_.clear();
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) v.index_.emplace(v.tokens_[i], static_cast<int>(i));
  return v;
}

Vocabulary Vocabulary::build(std::span<const TrainingTriple> triples, int min_freq) {
  std::map<std::string, int> counts;
  for (const auto& t : triples) {
    for (const auto& w : t.constituent) ++counts[w];
    for (const auto& w : t.modifier) ++counts[w];
  }
  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [w, c] : counts)
    if (c >= min_freq) kept.emplace_back(w, c);
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [w, c] : kept) tokens.push_back(std::move(w));
  return from_tokens(std::move(tokens));
}

int Vocabulary::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(std::span<const std::string> tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

// ---------------------------------------------------------------------------
// Gaussians

double kl_gaussians(const GaussianParams& q, const GaussianParams& p) {
  const auto d = q.mean.size();
  if (p.mean.size() != d || q.log_variance.size() != d || p.log_variance.size() != d)
    throw std::invalid_argument("kl_gaussians: dimension mismatch");
  const auto diff = (q.mean - p.mean).array();
  const auto inv_p = (-p.log_variance.array()).exp();
  const double kl =
      0.5 * (p.log_variance.array() - q.log_variance.array() + (q.log_variance - p.log_variance).array().exp() +
             diff.square() * inv_p - 1.0)
                .sum();
  return std::max(kl, 0.0);
}

// ---------------------------------------------------------------------------
// Model

GenerativeModel::GenerativeModel(CvaeConfig config, Vocabulary vocab, std::string rules_hash, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)), rules_hash_(std::move(rules_hash)) {
  build_parameters();
  std::mt19937_64 rng(seed);
  params_.init_uniform(rng, config_.init_scale);
  // Uniform type head at initialisation.
  params_.value(type_w_).setZero();
}

void GenerativeModel::build_parameters() {
  const int E = config_.embed_dim, H = config_.hidden, Z = config_.latent, T = config_.type_dim;
  const int V = vocab_.size();
  embedding_ = params_.add("embedding", E, V);
  type_table_ = params_.add("type_embedding", T, 4);
  auto gru = [&](const std::string& p, int in) {
    return EncoderIds{params_.add(p + ".w", 3 * H, in), params_.add(p + ".u", 3 * H, H),
                      params_.add(p + ".b", 3 * H, 1)};
  };
  enc_fwd_ = gru("encoder.fwd", E);
  enc_bwd_ = gru("encoder.bwd", E);
  auto prior_net = [&](const std::string& p, int in) {
    return PriorNetIds{params_.add(p + ".l1.w", H, in), params_.add(p + ".l1.b", H, 1),
                       params_.add(p + ".mu.w", Z, H),  params_.add(p + ".mu.b", Z, 1),
                       params_.add(p + ".lv.w", Z, H),  params_.add(p + ".lv.b", Z, 1)};
  };
  prior_ = prior_net("prior", 2 * H + T);
  post_ = prior_net("posterior", 4 * H + T);
  init_w_ = params_.add("decoder.init.w", H, Z + 2 * H + T);
  init_b_ = params_.add("decoder.init.b", H, 1);
  dec_ = gru("decoder.gru", E + Z);
  out_w_ = params_.add("decoder.out.w", V, H);
  out_b_ = params_.add("decoder.out.b", V, 1);
  type_w_ = params_.add("type_head.w", 4, Z);
  type_b_ = params_.add("type_head.b", 4, 1);
}

ParamRef GenerativeModel::ref(Gradients* grads, int id) const {
  return grads ? ParamRef{&params_.value(id), &(*grads)[id]} : nn::frozen(params_, id);
}

Vector GenerativeModel::encode(std::span<const std::string> tokens) const {
  const int H = config_.hidden;
  const auto ids = vocab_.encode(tokens);
  const auto& emb = params_.value(embedding_);
  Vector hf = Vector::Zero(H), hb = Vector::Zero(H);
  for (int id : ids)
    hf = nn::gru_step(params_.value(enc_fwd_.w), params_.value(enc_fwd_.u), params_.value(enc_fwd_.b), emb.col(id), hf);
  for (auto it = ids.rbegin(); it != ids.rend(); ++it)
    hb = nn::gru_step(params_.value(enc_bwd_.w), params_.value(enc_bwd_.u), params_.value(enc_bwd_.b), emb.col(*it),
                      hb);
  Vector out(2 * H);
  out << hf, hb;
  return out;
}

Vector GenerativeModel::type_embedding(ModifierType t) const {
  return params_.value(type_table_).col(static_cast<int>(t));
}

namespace {

GaussianParams mlp_gaussian(const nn::ParameterSet& p, const PriorNetIds& ids, const Vector& in) {
  Vector h = (p.value(ids.w1) * in + p.value(ids.b1).col(0)).array().tanh().matrix();
  return {p.value(ids.w_mu) * h + p.value(ids.b_mu).col(0), p.value(ids.w_lv) * h + p.value(ids.b_lv).col(0)};
}

}  // namespace

GaussianParams GenerativeModel::prior(const Vector& encoded_c, ModifierType t) const {
  Vector in(encoded_c.size() + config_.type_dim);
  in << encoded_c, type_embedding(t);
  return mlp_gaussian(params_, prior_, in);
}

GaussianParams GenerativeModel::prior(std::span<const std::string> c, ModifierType t) const {
  return prior(encode(c), t);
}

GaussianParams GenerativeModel::posterior(std::span<const std::string> c, ModifierType t,
                                          std::span<const std::string> m) const {
  Vector ec = encode(c), em = encode(m);
  Vector in(ec.size() + config_.type_dim + em.size());
  in << ec, type_embedding(t), em;
  return mlp_gaussian(params_, post_, in);
}

Vector GenerativeModel::type_probs(const Vector& z) const {
  return nn::softmax(params_.value(type_w_) * z + params_.value(type_b_).col(0));
}

std::vector<LatentCode> GenerativeModel::sample_prior(std::span<const std::string> c, ModifierType t, int n,
                                                      std::mt19937_64& rng) const {
  if (n < 1) throw std::invalid_argument("sample_prior: n must be >= 1");
  const auto g = prior(c, t);
  const Vector sigma = (0.5 * g.log_variance.array()).exp().matrix();
  std::vector<LatentCode> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    Vector eps = nn::standard_normal(rng, g.mean.size());
    out.push_back({g.mean + (sigma.array() * eps.array()).matrix()});
  }
  return out;
}

Modifier GenerativeModel::decode(const Vector& encoded_c, ModifierType t, const Vector& z) const {
  if (z.size() != config_.latent) throw std::invalid_argument("decode: latent dimension mismatch");
  const auto& emb = params_.value(embedding_);
  Vector init_in(z.size() + encoded_c.size() + config_.type_dim);
  init_in << z, encoded_c, type_embedding(t);
  Vector h = (params_.value(init_w_) * init_in + params_.value(init_b_).col(0)).array().tanh().matrix();
  Vector x(config_.embed_dim + config_.latent);
  x.tail(config_.latent) = z;
  Modifier m;
  m.type = t;
  int prev = Vocabulary::kBos;
  constexpr double kMasked = -std::numeric_limits<double>::infinity();
  for (int step = 0; step < config_.max_decode_len; ++step) {
    x.head(config_.embed_dim) = emb.col(prev);
    h = nn::gru_step(params_.value(dec_.w), params_.value(dec_.u), params_.value(dec_.b), x, h);
    Vector logits = params_.value(out_w_) * h + params_.value(out_b_).col(0);
    logits(Vocabulary::kUnk) = kMasked;
    logits(Vocabulary::kBos) = kMasked;
    if (step == 0) logits(Vocabulary::kEos) = kMasked;
    Eigen::Index best = 0;
    logits.maxCoeff(&best);
    if (best == Vocabulary::kEos) break;
    m.tokens.push_back(vocab_.token(static_cast<int>(best)));
    prev = static_cast<int>(best);
  }
  return m;
}

Modifier GenerativeModel::decode(std::span<const std::string> c, ModifierType t, const Vector& z) const {
  return decode(encode(c), t, z);
}

Var GenerativeModel::encode_on_tape(Tape& tape, Gradients* grads, std::span<const int> ids) const {
  const int H = config_.hidden;
  const nn::GruParams fwd{ref(grads, enc_fwd_.w), ref(grads, enc_fwd_.u), ref(grads, enc_fwd_.b)};
  const nn::GruParams bwd{ref(grads, enc_bwd_.w), ref(grads, enc_bwd_.u), ref(grads, enc_bwd_.b)};
  const ParamRef emb = ref(grads, embedding_);
  Var hf = tape.constant(Vector::Zero(H));
  Var hb = tape.constant(Vector::Zero(H));
  for (int id : ids) hf = tape.gru(fwd, tape.embed(emb, id), hf);
  for (auto it = ids.rbegin(); it != ids.rend(); ++it) hb = tape.gru(bwd, tape.embed(emb, *it), hb);
  return tape.concat({hf, hb});
}

std::pair<Var, Var> GenerativeModel::prior_on_tape(Tape& tape, const nn::ParameterSet& params, const PriorNetIds& ids,
                                                   Gradients* grads, Var encoded_c, Var type_embedding) {
  auto r = [&](int id) { return grads ? ParamRef{&params.value(id), &(*grads)[id]} : nn::frozen(params, id); };
  Var in = tape.concat({encoded_c, type_embedding});
  Var h = tape.tanh(tape.linear(r(ids.w1), r(ids.b1), in));
  return {tape.linear(r(ids.w_mu), r(ids.b_mu), h), tape.linear(r(ids.w_lv), r(ids.b_lv), h)};
}

Var GenerativeModel::type_nll_on_tape(Tape& tape, Var z, ModifierType t) const {
  Var logits = tape.linear(nn::frozen(params_, type_w_), nn::frozen(params_, type_b_), z);
  return tape.nll(logits, static_cast<int>(t));
}

LossParts GenerativeModel::example_loss(const TrainingTriple& triple, const Vector& eps, Gradients* grads,
                                        const LossWeights& weights) const {
  Tape tape;
  const auto c_ids = vocab_.encode(triple.constituent);
  const auto m_ids = vocab_.encode(triple.modifier);
  Var enc_c = encode_on_tape(tape, grads, c_ids);
  Var enc_m = encode_on_tape(tape, grads, m_ids);
  Var temb = tape.embed(ref(grads, type_table_), static_cast<int>(triple.type));

  auto [mu_p, lv_p] = prior_on_tape(tape, params_, prior_, grads, enc_c, temb);
  Var post_in = tape.concat({enc_c, temb, enc_m});
  Var post_h = tape.tanh(tape.linear(ref(grads, post_.w1), ref(grads, post_.b1), post_in));
  Var mu_q = tape.linear(ref(grads, post_.w_mu), ref(grads, post_.b_mu), post_h);
  Var lv_q = tape.linear(ref(grads, post_.w_lv), ref(grads, post_.b_lv), post_h);
  Var z = tape.reparam(mu_q, lv_q, eps);
  Var kl = tape.kl_diag(mu_q, lv_q, mu_p, lv_p);

  Var h = tape.tanh(tape.linear(ref(grads, init_w_), ref(grads, init_b_), tape.concat({z, enc_c, temb})));
  const nn::GruParams dec{ref(grads, dec_.w), ref(grads, dec_.u), ref(grads, dec_.b)};
  const ParamRef emb = ref(grads, embedding_);
  Var recon = tape.constant(Vector::Zero(1));
  int prev = Vocabulary::kBos;
  std::vector<int> targets = m_ids;
  targets.push_back(Vocabulary::kEos);
  for (int target : targets) {
    h = tape.gru(dec, tape.concat({tape.embed(emb, prev), z}), h);
    recon = tape.add(recon, tape.softmax_nll(ref(grads, out_w_), ref(grads, out_b_), h, target));
    prev = target;
  }
  Var type_logits = tape.linear(ref(grads, type_w_), ref(grads, type_b_), z);
  Var type_nll = tape.nll(type_logits, static_cast<int>(triple.type));

  LossParts parts;
  parts.reconstruction = tape.scalar(recon);
  parts.kl = tape.scalar(kl);
  parts.type = tape.scalar(type_nll);
  parts.tokens = static_cast<int>(targets.size());
  if (grads != nullptr) {
    const double w = parts.kl < weights.free_bits ? 0.0 : weights.kl_weight;
    Var total = tape.weighted_sum({{recon, 1.0}, {kl, w}, {type_nll, 1.0}});
    tape.backward(total);
  }
  return parts;
}

// ---------------------------------------------------------------------------
// Checkpoints: "ADVXCVAE" | u32 version | u64 header bytes | JSON header | raw f64 tensors

namespace {
constexpr char kMagic[8] = {'A', 'D', 'V', 'X', 'C', 'V', 'A', 'E'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void GenerativeModel::save(const std::filesystem::path& path) const {
  nlohmann::json header;
  header["format"] = "advexp-cvae";
  header["rules_hash"] = rules_hash_;
  header["config"] = {{"embed_dim", config_.embed_dim}, {"hidden", config_.hidden},
                      {"latent", config_.latent},       {"type_dim", config_.type_dim},
                      {"max_decode_len", config_.max_decode_len}, {"min_freq", config_.min_freq},
                      {"init_scale", config_.init_scale}};
  header["vocab"] = std::vector<std::string>(vocab_.tokens().begin() + 3, vocab_.tokens().end());
  auto& tensors = header["tensors"] = nlohmann::json::array();
  for (const auto& p : params_.all())
    tensors.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  const std::string text = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(&kVersion), sizeof kVersion);
  const std::uint64_t len = text.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof len);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const auto& p : params_.all())
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(static_cast<std::size_t>(p.value.size()) * sizeof(double)));
  if (!out) throw std::runtime_error("failed writing checkpoint " + path.string());
}

GenerativeModel GenerativeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || std::memcmp(magic, kMagic, sizeof magic) != 0) throw FormatError(path.string() + ": not a CVAE checkpoint");
  if (version != kVersion) throw FormatError(path.string() + ": unsupported checkpoint version");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": bad checkpoint header: " + e.what());
  }
  CvaeConfig cfg;
  const auto& c = header.at("config");
  cfg.embed_dim = c.at("embed_dim");
  cfg.hidden = c.at("hidden");
  cfg.latent = c.at("latent");
  cfg.type_dim = c.at("type_dim");
  cfg.max_decode_len = c.at("max_decode_len");
  cfg.min_freq = c.at("min_freq");
  cfg.init_scale = c.at("init_scale");
  GenerativeModel model(cfg, Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>()),
                        header.at("rules_hash").get<std::string>(), 0);
  const auto& tensors = header.at("tensors");
  if (tensors.size() != model.params_.size()) throw FormatError(path.string() + ": tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& p = model.params_.all()[i];
    if (tensors[i].at("name") != p.name || tensors[i].at("rows") != p.value.rows() ||
        tensors[i].at("cols") != p.value.cols())
      throw FormatError(path.string() + ": tensor layout mismatch at " + p.name);
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(static_cast<std::size_t>(p.value.size()) * sizeof(double)));
  }
  if (!in) throw FormatError(path.string() + ": truncated checkpoint");
  return model;
}

// ---------------------------------------------------------------------------
// Batch losses and gradient kernels

namespace {

BatchLoss summarize(const std::vector<LossParts>& parts) {
  BatchLoss b;
  double tokens = 0;
  for (const auto& p : parts) {
    b.reconstruction += p.reconstruction;
    b.kl += p.kl;
    b.l2 += p.type;
    tokens += p.tokens;
  }
  const double n = static_cast<double>(parts.size());
  b.nll_per_token = tokens > 0 ? b.reconstruction / tokens : 0.0;
  b.reconstruction /= n;
  b.kl /= n;
  b.l2 /= n;
  b.l1 = b.reconstruction + b.kl;
  return b;
}

}  // namespace

BatchLoss elbo_loss(const GenerativeModel& model, std::span<const TrainingTriple> batch, std::mt19937_64& rng) {
  if (batch.empty()) throw std::invalid_argument("elbo_loss: empty batch");
  std::vector<LossParts> parts;
  for (const auto& t : batch) parts.push_back(model.example_loss(t, nn::standard_normal(rng, model.config().latent), nullptr));
  return summarize(parts);
}

double type_loss(const GenerativeModel& model, std::span<const TrainingTriple> batch, std::mt19937_64& rng) {
  return elbo_loss(model, batch, rng).l2;
}

BatchLoss batch_gradients_serial(const GenerativeModel& model, std::span<const TrainingTriple> batch,
                                 std::span<const Vector> eps, Gradients& grads, const LossWeights& weights) {
  if (batch.empty() || eps.size() != batch.size()) throw std::invalid_argument("batch_gradients: bad batch");
  grads.zero();
  std::vector<LossParts> parts(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) parts[i] = model.example_loss(batch[i], eps[i], &grads, weights);
  grads.scale(1.0 / static_cast<double>(batch.size()));
  return summarize(parts);
}

BatchLoss batch_gradients_parallel(const GenerativeModel& model, std::span<const TrainingTriple> batch,
                                   std::span<const Vector> eps, Gradients& grads, const LossWeights& weights) {
#ifndef _OPENMP
  return batch_gradients_serial(model, batch, eps, grads, weights);
#else
  if (batch.empty() || eps.size() != batch.size()) throw std::invalid_argument("batch_gradients: bad batch");
  const int threads = std::min<int>(omp_get_max_threads(), static_cast<int>(batch.size()));
  if (threads <= 1) return batch_gradients_serial(model, batch, eps, grads, weights);
  std::vector<Gradients> local(static_cast<std::size_t>(threads), Gradients(model.params()));
  std::vector<LossParts> parts(batch.size());
  const auto n = static_cast<long>(batch.size());
#pragma omp parallel for num_threads(threads) schedule(static)
  for (long i = 0; i < n; ++i) {
    auto& g = local[static_cast<std::size_t>(omp_get_thread_num())];
    parts[static_cast<std::size_t>(i)] =
        model.example_loss(batch[static_cast<std::size_t>(i)], eps[static_cast<std::size_t>(i)], &g, weights);
  }
  grads.zero();
  for (const auto& g : local) grads.add(g);
  grads.scale(1.0 / static_cast<double>(batch.size()));
  return summarize(parts);
#endif
}

GenerativeModel pretrain(std::span<const TrainingTriple> triples, const CvaeConfig& config,
                         const PretrainOptions& options, const RuleSet& rules) {
  if (triples.empty()) throw std::invalid_argument("pretrain: no training triples");
  GenerativeModel model(config, Vocabulary::build(triples, config.min_freq), rules.hash_hex(), options.seed);
  std::mt19937_64 rng(options.seed ^ 0x9e3779b97f4a7c15ull);
  nn::Adam adam(options.learning_rate);
  Gradients grads(model.params());

  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t cursor = 0;
  const auto bs = static_cast<std::size_t>(std::max(1, options.batch_size));

  std::vector<TrainingTriple> batch;
  std::vector<Vector> eps;
  for (int step = 1; step <= options.steps; ++step) {
    batch.clear();
    eps.clear();
    for (std::size_t k = 0; k < std::min(bs, triples.size()); ++k) {
      if (cursor == order.size()) {
        std::shuffle(order.begin(), order.end(), rng);
        cursor = 0;
      }
      batch.push_back(triples[order[cursor++]]);
      eps.push_back(nn::standard_normal(rng, config.latent));
    }
    const double kl_weight =
        options.kl_anneal_steps > 0 ? std::min(1.0, static_cast<double>(step) / options.kl_anneal_steps) : 1.0;
    const LossWeights weights{kl_weight, options.free_bits};
    const BatchLoss loss = options.parallel ? batch_gradients_parallel(model, batch, eps, grads, weights)
                                            : batch_gradients_serial(model, batch, eps, grads, weights);
    adam.step(model.mutable_params(), grads, options.clip_norm);
    if (options.on_step) options.on_step(step, loss);
  }
  return model;
}

}  // namespace advexp
