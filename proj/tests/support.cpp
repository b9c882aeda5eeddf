#include "support.hpp"

#include "advexp/rules.hpp"

#include <cmath>

namespace advexp::test {

std::filesystem::path fixture(std::string_view name) { return std::filesystem::path(ADVEXP_FIXTURE_DIR) / name; }

LabeledText single(std::string_view ptb, std::string label, std::string id) {
  LabeledText t{std::move(id), {Sentence(parse_ptb(ptb))}, std::move(label), TaskKind::kSingle};
  t.validate();
  return t;
}

LabeledText pair(std::string_view ptb1, std::string_view ptb2, std::string label, TaskKind kind, std::string id) {
  LabeledText t{std::move(id), {Sentence(parse_ptb(ptb1)), Sentence(parse_ptb(ptb2))}, std::move(label), kind};
  t.validate();
  return t;
}

const toy::Datasets& toy_data() {
  static const toy::Datasets data = [] {
    toy::Options o;
    o.sentiment_train = 300;
    o.sentiment_test = 60;
    o.pair_train = 300;
    o.pair_test = 60;
    o.corpus = 1200;
    return toy::generate(o);
  }();
  return data;
}

CvaeConfig tiny_config() {
  CvaeConfig c;
  c.embed_dim = 16;
  c.hidden = 32;
  c.latent = 8;
  c.type_dim = 4;
  c.max_decode_len = 10;
  c.min_freq = 1;
  return c;
}

const GenerativeModel& tiny_model() {
  static const GenerativeModel model = [] {
    const auto triples = extract_training_triples(toy_data().corpus);
    PretrainOptions o;
    o.steps = 400;
    o.batch_size = 16;
    o.learning_rate = 5e-3;
    o.kl_anneal_steps = 100;
    o.free_bits = 2.0;
    return pretrain(triples, tiny_config(), o);
  }();
  return model;
}

std::vector<double> TriggerTarget::predict(const LabeledText& text) const {
  int n = 0;
  for (const auto& s : text.sentences)
    for (const auto& w : s.norm()) n += static_cast<int>(triggers_.count(w));
  const double p = 1.0 / (1.0 + std::exp(-(bias_ - slope_ * n)));
  return {p, 1.0 - p};
}

std::vector<double> FailingTarget::predict(const LabeledText& text) const {
  if (++calls_ >= fail_from_) throw AdapterError("connection reset");
  return inner_.predict(text);
}

const ParseTree* find_node(const ParseTree& t, Span span, std::string_view label) {
  if (t.span == span && strip_function_tags(t.label) == label) return &t;
  for (const auto& c : t.children)
    if (const auto* r = find_node(c, span, label)) return r;
  return nullptr;
}

// Attached modifier types read straight off the template definitions:
// NP: PP / clause children after the head, appositive NP after a comma;
// VP: ADVP / PP / bare adverb after the verb; S: ADVP / PP children anywhere.
ModifierTypeSet oracle_existing(const ParseTree& n) {
  ModifierTypeSet s;
  const auto cat = strip_function_tags(n.label);
  for (std::size_t i = 0; i < n.children.size(); ++i) {
    const auto l = strip_function_tags(n.children[i].label);
    if (cat == "NP" && i >= 1) {
      if (l == "PP") s.insert(ModifierType::kPp);
      if (l == "ADVP") s.insert(ModifierType::kAdvp);
      if (l == "SBAR" || l == "S" || l == "VP" || l == "RRC") s.insert(ModifierType::kCl);
      if (l == "NP" && n.children[i - 1].word == ",") s.insert(ModifierType::kAppos);
    } else if (cat == "VP" && i >= 1) {
      if (l == "ADVP" || l == "RB") s.insert(ModifierType::kAdvp);
      if (l == "PP") s.insert(ModifierType::kPp);
    } else if (cat == "S") {
      if (l == "ADVP") s.insert(ModifierType::kAdvp);
      if (l == "PP") s.insert(ModifierType::kPp);
    }
  }
  return s;
}

}  // namespace advexp::test
