#include "advexp/classifiers.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

namespace advexp {

using nn::Matrix;
using nn::Vector;

std::vector<std::vector<std::string>> text_tokens(const LabeledText& text) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : text.sentences) {
    std::vector<std::string> toks;
    for (const auto& t : s.tokens()) toks.push_back(lowercase(t));
    out.push_back(std::move(toks));
  }
  return out;
}

std::vector<std::string> collect_labels(std::span<const LabeledText> data) {
  std::set<std::string> s;
  for (const auto& t : data) s.insert(t.label);
  return {s.begin(), s.end()};
}

double accuracy(const TargetModel& model, std::span<const LabeledText> data) {
  if (data.empty()) return 0.0;
  const auto labels = model.labels();
  long correct = 0;
  for (const auto& t : data) {
    const auto probs = model.predict(t);
    if (labels[static_cast<std::size_t>(argmax(probs))] == t.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw FormatError("matrix size mismatch");
  return Eigen::Map<const Matrix>(data.data(), rows, cols);
}

int label_of(const std::vector<std::string>& labels, const std::string& label) {
  auto it = std::find(labels.begin(), labels.end(), label);
  if (it == labels.end()) throw std::invalid_argument("unknown label '" + label + "'");
  return static_cast<int>(it - labels.begin());
}

std::unordered_map<std::string, int> index_of(const std::vector<std::string>& vocab) {
  std::unordered_map<std::string, int> m;
  for (std::size_t i = 0; i < vocab.size(); ++i) m.emplace(vocab[i], static_cast<int>(i));
  return m;
}

std::vector<std::size_t> shuffled(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Fisher-Yates with explicit draws so the order is identical across standard libraries.
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

}  // namespace

// ---------------------------------------------------------------------------
// Bag of words

Vector BowClassifier::features(const LabeledText& text) const {
  const auto v = static_cast<Eigen::Index>(vocab_.size());
  const auto toks = text_tokens(text);
  auto bow = [&](const std::vector<std::string>& sent) {
    Vector f = Vector::Zero(v);
    for (const auto& t : sent)
      if (auto it = index_.find(t); it != index_.end()) f(it->second) += 1.0;
    return f;
  };
  if (!pair_) {
    Vector f = Vector::Zero(v);
    for (const auto& s : toks) f += bow(s);
    return f;
  }
  if (toks.size() != 2) throw std::invalid_argument("pair classifier needs two sentences");
  Vector a = bow(toks[0]), b = bow(toks[1]);
  Vector f(3 * v);
  f << a, b, (a - b).cwiseAbs();
  return f;
}

std::vector<double> BowClassifier::predict(const LabeledText& text) const {
  const Vector p = nn::softmax(w_ * features(text) + b_);
  return {p.data(), p.data() + p.size()};
}

double BowClassifier::weight(const std::string& token, int label) const {
  auto it = index_.find(token);
  return it == index_.end() ? 0.0 : w_(label, it->second);
}

BowClassifier BowClassifier::train(std::span<const LabeledText> data, const TrainOptions& options) {
  if (data.empty()) throw std::invalid_argument("empty training set");
  BowClassifier m;
  m.labels_ = collect_labels(data);
  m.pair_ = is_pair(data.front().kind);
  std::set<std::string> vocab;
  for (const auto& t : data) {
    if (is_pair(t.kind) != m.pair_) throw std::invalid_argument("training set mixes single and pair texts");
    for (const auto& s : text_tokens(t)) vocab.insert(s.begin(), s.end());
  }
  m.vocab_.assign(vocab.begin(), vocab.end());
  m.index_ = index_of(m.vocab_);

  std::vector<Vector> feats;
  std::vector<int> gold;
  for (const auto& t : data) {
    feats.push_back(m.features(t));
    gold.push_back(label_of(m.labels_, t.label));
  }
  const auto c = static_cast<Eigen::Index>(m.labels_.size());
  m.w_ = Matrix::Zero(c, feats.front().size());
  m.b_ = Vector::Zero(c);
  std::mt19937_64 rng(options.seed);
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    const double lr = options.learning_rate / (1.0 + 0.1 * epoch);
    for (std::size_t i : shuffled(feats.size(), rng)) {
      Vector g = nn::softmax(m.w_ * feats[i] + m.b_);
      g(gold[i]) -= 1.0;
      m.w_ = (1.0 - lr * options.l2) * m.w_ - lr * g * feats[i].transpose();
      m.b_ -= lr * g;
    }
  }
  return m;
}

nlohmann::json BowClassifier::to_json() const {
  return {{"type", "bow"}, {"labels", labels_}, {"vocab", vocab_}, {"pair", pair_},
          {"w", matrix_to_json(w_)}, {"b", matrix_to_json(b_)}};
}

BowClassifier BowClassifier::from_json(const nlohmann::json& j) {
  BowClassifier m;
  m.labels_ = j.at("labels").get<std::vector<std::string>>();
  m.vocab_ = j.at("vocab").get<std::vector<std::string>>();
  m.index_ = index_of(m.vocab_);
  m.pair_ = j.at("pair").get<bool>();
  m.w_ = matrix_from_json(j.at("w"));
  m.b_ = matrix_from_json(j.at("b")).col(0);
  const auto f = static_cast<Eigen::Index>(m.vocab_.size()) * (m.pair_ ? 3 : 1);
  if (m.w_.rows() != static_cast<Eigen::Index>(m.labels_.size()) || m.w_.cols() != f || m.b_.size() != m.w_.rows())
    throw FormatError("bag-of-words model shape mismatch");
  return m;
}

// ---------------------------------------------------------------------------
// CNN

namespace {
constexpr int kWidth = 3;
constexpr int kUnkId = 0, kPadId = 1, kSepId = 2;
}  // namespace

void CnnClassifier::register_params(int embed_dim, int filters) {
  const auto v = static_cast<Eigen::Index>(vocab_.size());
  const auto c = static_cast<Eigen::Index>(labels_.size());
  emb_ = params_.add("emb", embed_dim, v);
  conv_w_ = params_.add("conv.w", filters, kWidth * embed_dim);
  conv_b_ = params_.add("conv.b", filters, 1);
  out_w_ = params_.add("out.w", c, filters);
  out_b_ = params_.add("out.b", c, 1);
}

std::vector<int> CnnClassifier::encode(const LabeledText& text) const {
  std::vector<int> ids{kPadId};
  const auto toks = text_tokens(text);
  for (std::size_t s = 0; s < toks.size(); ++s) {
    if (s > 0) ids.push_back(kSepId);
    for (const auto& t : toks[s]) {
      auto it = index_.find(t);
      ids.push_back(it == index_.end() ? kUnkId : it->second);
    }
  }
  ids.push_back(kPadId);
  return ids;
}

std::vector<double> CnnClassifier::predict(const LabeledText& text) const {
  const auto ids = encode(text);
  const Matrix& emb = params_.value(emb_);
  const Matrix& cw = params_.value(conv_w_);
  const auto e = emb.rows();
  Vector pooled = Vector::Constant(cw.rows(), -std::numeric_limits<double>::infinity());
  Vector window(kWidth * e);
  for (std::size_t i = 0; i + kWidth <= ids.size(); ++i) {
    for (int k = 0; k < kWidth; ++k) window.segment(k * e, e) = emb.col(ids[i + static_cast<std::size_t>(k)]);
    Vector h = (cw * window + params_.value(conv_b_).col(0)).cwiseMax(0.0);
    pooled = pooled.cwiseMax(h);
  }
  const Vector p = nn::softmax(params_.value(out_w_) * pooled + params_.value(out_b_).col(0));
  return {p.data(), p.data() + p.size()};
}

nn::Var CnnClassifier::logits_on_tape(nn::Tape& tape, nn::Gradients* grads, const LabeledText& text) const {
  auto ref = [&](int id) { return grads ? nn::trainable(params_, *grads, id) : nn::frozen(params_, id); };
  const auto ids = encode(text);
  std::vector<nn::Var> embs, conv;
  for (int id : ids) embs.push_back(tape.embed(ref(emb_), id));
  for (std::size_t i = 0; i + kWidth <= embs.size(); ++i) {
    nn::Var window = tape.concat(std::span<const nn::Var>(embs.data() + i, kWidth));
    conv.push_back(tape.relu(tape.linear(ref(conv_w_), ref(conv_b_), window)));
  }
  return tape.linear(ref(out_w_), ref(out_b_), tape.max_pool(conv));
}

CnnClassifier CnnClassifier::train(std::span<const LabeledText> data, const TrainOptions& options) {
  if (data.empty()) throw std::invalid_argument("empty training set");
  CnnClassifier m;
  m.labels_ = collect_labels(data);
  std::set<std::string> vocab;
  for (const auto& t : data)
    for (const auto& s : text_tokens(t)) vocab.insert(s.begin(), s.end());
  m.vocab_ = {"<unk>", "<pad>", "<sep>"};
  m.vocab_.insert(m.vocab_.end(), vocab.begin(), vocab.end());
  m.index_ = index_of(m.vocab_);
  m.register_params(options.embed_dim, options.filters);

  std::mt19937_64 rng(options.seed);
  m.params_.init_uniform(rng, 0.1);
  nn::Adam adam(options.learning_rate);
  nn::Gradients grads(m.params_);
  std::vector<int> gold;
  for (const auto& t : data) gold.push_back(label_of(m.labels_, t.label));
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    for (std::size_t i : shuffled(data.size(), rng)) {
      grads.zero();
      nn::Tape tape;
      nn::Var loss = tape.nll(m.logits_on_tape(tape, &grads, data[i]), gold[i]);
      tape.backward(loss);
      adam.step(m.params_, grads, 5.0);
    }
  }
  return m;
}

nlohmann::json CnnClassifier::to_json() const {
  nlohmann::json tensors = nlohmann::json::object();
  for (const auto& p : params_.all()) tensors[p.name] = matrix_to_json(p.value);
  return {{"type", "cnn"}, {"labels", labels_}, {"vocab", vocab_}, {"tensors", tensors}};
}

CnnClassifier CnnClassifier::from_json(const nlohmann::json& j) {
  CnnClassifier m;
  m.labels_ = j.at("labels").get<std::vector<std::string>>();
  m.vocab_ = j.at("vocab").get<std::vector<std::string>>();
  m.index_ = index_of(m.vocab_);
  const auto& t = j.at("tensors");
  const Matrix emb = matrix_from_json(t.at("emb"));
  const Matrix cw = matrix_from_json(t.at("conv.w"));
  m.register_params(static_cast<int>(emb.rows()), static_cast<int>(cw.rows()));
  for (auto& p : m.params_.all()) {
    Matrix v = matrix_from_json(t.at(p.name));
    if (v.rows() != p.value.rows() || v.cols() != p.value.cols()) throw FormatError("cnn tensor " + p.name + " shape mismatch");
    p.value = std::move(v);
  }
  return m;
}

// ---------------------------------------------------------------------------

void save_classifier(const std::filesystem::path& path, const TargetModel& model) {
  nlohmann::json j;
  if (auto* bow = dynamic_cast<const BowClassifier*>(&model)) j = bow->to_json();
  else if (auto* cnn = dynamic_cast<const CnnClassifier*>(&model)) j = cnn->to_json();
  else throw std::invalid_argument("only bundled classifiers can be saved");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump() << '\n';
}

std::unique_ptr<TargetModel> load_classifier(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
    const auto type = j.at("type").get<std::string>();
    if (type == "bow") return std::make_unique<BowClassifier>(BowClassifier::from_json(j));
    if (type == "cnn") return std::make_unique<CnnClassifier>(CnnClassifier::from_json(j));
    throw FormatError("unknown classifier type '" + type + "'");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace advexp
