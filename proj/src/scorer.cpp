#include "advexp/scorer.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace advexp {

namespace {

const std::string kBos = "<s>";
const std::string kEos = "</s>";

long lookup(const std::map<std::string, long>& m, const std::string& key) {
  auto it = m.find(key);
  return it == m.end() ? 0 : it->second;
}

std::vector<std::vector<std::string>> lowered(const LabeledText& text) {
  std::vector<std::vector<std::string>> out;
  for (const auto& s : text.sentences) {
    std::vector<std::string> toks;
    for (const auto& t : s.tokens()) toks.push_back(lowercase(t));
    out.push_back(std::move(toks));
  }
  return out;
}

}  // namespace

NgramScorer NgramScorer::train(std::span<const std::vector<std::string>> sentences, Weights weights) {
  if (sentences.empty()) throw std::invalid_argument("n-gram scorer needs a non-empty corpus");
  const double sum = weights.trigram + weights.bigram + weights.unigram;
  if (std::abs(sum - 1.0) > 1e-9 || weights.unigram <= 0 || weights.bigram < 0 || weights.trigram < 0)
    throw std::invalid_argument("interpolation weights must be non-negative, sum to 1, unigram > 0");
  NgramScorer m;
  m.weights_ = weights;
  for (const auto& raw : sentences) {
    std::vector<std::string> s{kBos, kBos};
    for (const auto& t : raw) s.push_back(lowercase(t));
    s.push_back(kEos);
    for (std::size_t i = 2; i < s.size(); ++i) {
      ++m.uni_[s[i]];
      ++m.total_;
      ++m.bi_[s[i - 1] + ' ' + s[i]];
      ++m.bi_hist_[s[i - 1]];
      ++m.tri_[s[i - 2] + ' ' + s[i - 1] + ' ' + s[i]];
      ++m.tri_hist_[s[i - 2] + ' ' + s[i - 1]];
    }
  }
  return m;
}

NgramScorer NgramScorer::train(std::span<const LabeledText> corpus, Weights weights) {
  std::vector<std::vector<std::string>> sents;
  for (const auto& t : corpus)
    for (auto& s : lowered(t)) sents.push_back(std::move(s));
  return train(sents, weights);
}

double NgramScorer::prob(const std::string& u, const std::string& v, const std::string& w) const {
  const auto vocab = static_cast<double>(uni_.size() + 1);
  double p = weights_.unigram * (static_cast<double>(lookup(uni_, w)) + 1.0) / (static_cast<double>(total_) + vocab);
  if (const long h = lookup(bi_hist_, v); h > 0)
    p += weights_.bigram * static_cast<double>(lookup(bi_, v + ' ' + w)) / static_cast<double>(h);
  if (const long h = lookup(tri_hist_, u + ' ' + v); h > 0)
    p += weights_.trigram * static_cast<double>(lookup(tri_, u + ' ' + v + ' ' + w)) / static_cast<double>(h);
  return p;
}

double NgramScorer::perplexity(std::span<const std::vector<std::string>> sentences) const {
  double nll = 0;
  long n = 0;
  for (const auto& raw : sentences) {
    std::vector<std::string> s{kBos, kBos};
    for (const auto& t : raw) s.push_back(lowercase(t));
    s.push_back(kEos);
    for (std::size_t i = 2; i < s.size(); ++i) {
      nll -= std::log(prob(s[i - 2], s[i - 1], s[i]));
      ++n;
    }
  }
  long words = n - static_cast<long>(sentences.size());
  if (words <= 0) throw std::invalid_argument("cannot score an empty text");
  return std::exp(nll / static_cast<double>(n));
}

double NgramScorer::score(const LabeledText& text) const { return perplexity(lowered(text)); }

nlohmann::json NgramScorer::to_json() const {
  return {{"type", "ngram"},
          {"weights", {weights_.trigram, weights_.bigram, weights_.unigram}},
          {"total", total_},
          {"uni", uni_},
          {"bi", bi_},
          {"bi_hist", bi_hist_},
          {"tri", tri_},
          {"tri_hist", tri_hist_}};
}

NgramScorer NgramScorer::from_json(const nlohmann::json& j) {
  NgramScorer m;
  try {
    const auto w = j.at("weights").get<std::vector<double>>();
    if (w.size() != 3) throw FormatError("n-gram weights need three values");
    m.weights_ = {w[0], w[1], w[2]};
    m.total_ = j.at("total").get<long>();
    m.uni_ = j.at("uni").get<std::map<std::string, long>>();
    m.bi_ = j.at("bi").get<std::map<std::string, long>>();
    m.bi_hist_ = j.at("bi_hist").get<std::map<std::string, long>>();
    m.tri_ = j.at("tri").get<std::map<std::string, long>>();
    m.tri_hist_ = j.at("tri_hist").get<std::map<std::string, long>>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed n-gram model: ") + e.what());
  }
  return m;
}

void NgramScorer::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << to_json().dump() << '\n';
}

NgramScorer NgramScorer::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

ExternalScorer::ExternalScorer(const std::string& endpoint) : channel_(std::make_unique<LineChannel>(endpoint)) {}

double ExternalScorer::score(const LabeledText& text) const {
  const std::string reply = channel_->request(external_request(text));
  double ppl = 0;
  try {
    ppl = nlohmann::json::parse(reply).at("perplexity").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw AdapterError(std::string("bad scorer response: ") + e.what());
  }
  if (!(ppl > 0) || !std::isfinite(ppl)) throw AdapterError("scorer returned a non-positive perplexity");
  return ppl;
}

}  // namespace advexp
