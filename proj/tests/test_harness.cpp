#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <omp.h>

#include "advexp/classifiers.hpp"
#include "advexp/config.hpp"
#include "advexp/harness.hpp"
#include "advexp/scorer.hpp"
#include "support.hpp"

using namespace advexp;
namespace fs = std::filesystem;

namespace {

std::vector<std::vector<std::string>> sents(std::initializer_list<std::string> lines) {
  std::vector<std::vector<std::string>> out;
  for (const auto& l : lines) out.push_back(split_whitespace(l));
  return out;
}

fs::path temp(const std::string& name) { return fs::temp_directory_path() / ("advexp_test_" + name); }

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

AttackResult result(std::string id, AttackStatus status, bool clean_correct = true) {
  AttackResult r;
  r.id = std::move(id);
  r.status = status;
  r.clean_correct = clean_correct;
  return r;
}

std::set<std::string> triggers() {
  const auto& w = toy::negative_words();
  return {w.begin(), w.end()};
}

}  // namespace

// Corpus: "a b", "a c", "b c". Predicted tokens: a 2, b 2, c 2, </s> 3 (N = 9,
// V = 4 seen + 1 unknown = 5).
TEST(Ngram, HandComputedProbabilities) {
  const auto lm = NgramScorer::train(sents({"a b", "a c", "b c"}));
  const double l1 = 0.1, l2 = 0.3, l3 = 0.6;
  const double pa = l1 * 3.0 / 14 + l2 * 2.0 / 3 + l3 * 2.0 / 3;     // a | <s> <s>
  const double pb = l1 * 3.0 / 14 + l2 * 1.0 / 2 + l3 * 1.0 / 2;     // b | <s> a
  const double pe = l1 * 4.0 / 14 + l2 * 1.0 / 2 + l3 * 1.0 / 1;     // </s> | a b
  const double pz = l1 * 1.0 / 14;                                   // z | <s> <s>
  const double pe_z = l1 * 4.0 / 14;                                 // </s> | <s> z, no history
  EXPECT_NEAR(lm.prob("<s>", "<s>", "a"), pa, 1e-12);
  EXPECT_NEAR(lm.prob("<s>", "a", "b"), pb, 1e-12);
  EXPECT_NEAR(lm.prob("a", "b", "</s>"), pe, 1e-12);
  EXPECT_NEAR(lm.prob("<s>", "<s>", "z"), pz, 1e-12);
  EXPECT_NEAR(lm.perplexity(sents({"a b"})), std::exp(-(std::log(pa) + std::log(pb) + std::log(pe)) / 3), 1e-12);
  EXPECT_NEAR(lm.perplexity(sents({"z"})), std::exp(-(std::log(pz) + std::log(pe_z)) / 2), 1e-12);
  EXPECT_NEAR(lm.perplexity(sents({"A B"})), lm.perplexity(sents({"a b"})), 1e-12);
}

TEST(Ngram, FluencyOrderingAndPersistence) {
  const auto& corpus = test::toy_data().corpus;
  const auto lm = NgramScorer::train(corpus);
  const auto& text = test::toy_data().sentiment_test[0];
  auto scrambled = text.sentences[0].tokens();
  std::reverse(scrambled.begin(), scrambled.end());
  const std::vector<std::vector<std::string>> fluent{text.sentences[0].tokens()}, jumbled{scrambled};
  EXPECT_LT(lm.perplexity(fluent), lm.perplexity(jumbled));
  EXPECT_EQ(lm.score(text), lm.score(text));
  EXPECT_THROW(lm.perplexity(sents({""})), std::invalid_argument);
  EXPECT_THROW(NgramScorer::train(sents({"a"}), {0.5, 0.5, 0.0}), std::invalid_argument);

  const auto path = temp("ngram.json");
  lm.save(path);
  EXPECT_EQ(NgramScorer::load(path).score(text), lm.score(text));
  std::ofstream(path) << "{\"type\": \"ngram\"}";
  EXPECT_THROW(NgramScorer::load(path), FormatError);
  fs::remove(path);
}

TEST(Evaluate, RecomputesMetricsByHand) {
  const auto orig = test::single("(S (NP (DT The) (NN waiter)) (VP (VBD was) (ADJP (JJ great))) (. .))");  // 5 tokens
  std::vector<AttackResult> rs;
  auto s1 = result("a", AttackStatus::kSuccess);
  s1.original = orig;
  s1.adversarial = test::single("(S (NP (DT The) (NN waiter)) (VP (VBD was) (ADVP (RB never)) (ADJP (JJ great))) (. .))");
  s1.perplexity = 10;
  s1.queries_used = 100;
  s1.queries = {1, 60, 39};
  rs.push_back(s1);
  auto f1 = result("b", AttackStatus::kFailed);
  f1.original = orig;
  f1.queries_used = 300;
  f1.queries = {1, 240, 59};
  rs.push_back(f1);
  auto k1 = result("c", AttackStatus::kSkipped);
  k1.original = test::single("(INTJ (UH Yes) (. .))");
  k1.queries_used = 1;
  k1.queries = {1, 0, 0};
  rs.push_back(k1);
  auto m1 = result("d", AttackStatus::kSkipped, false);
  m1.original = orig;
  m1.queries_used = 1;
  rs.push_back(m1);
  rs.push_back(result("e", AttackStatus::kError));

  const auto m = evaluate(rs);
  EXPECT_EQ(m.examples, 4);
  EXPECT_EQ(m.errors, 1);
  EXPECT_EQ(m.clean_correct, 3);
  EXPECT_EQ(m.attacked, 2);
  EXPECT_EQ(m.successes, 1);
  EXPECT_EQ(m.failed, 1);
  EXPECT_EQ(m.skipped, 1);
  EXPECT_DOUBLE_EQ(m.orig_accuracy, 0.75);
  EXPECT_DOUBLE_EQ(m.adv_accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.attack_success_rate, 1.0 / 3);
  EXPECT_DOUBLE_EQ(*m.avg_adv_length, 6);
  EXPECT_DOUBLE_EQ(*m.avg_orig_length_of_successes, 5);
  EXPECT_FALSE(m.orig_accuracy_on_long);  // nothing longer than 6 tokens
  EXPECT_DOUBLE_EQ(m.mean_queries, 401.0 / 3);
  EXPECT_DOUBLE_EQ(m.mean_scoring_queries, 100.0);
  EXPECT_DOUBLE_EQ(m.mean_beam_queries, 98.0 / 3);
  EXPECT_EQ(m.max_queries, 300);
  EXPECT_DOUBLE_EQ(m.skipped_fraction, 1.0 / 3);
  EXPECT_DOUBLE_EQ(*m.mean_perplexity, 10);
  EXPECT_EQ(evaluate({}).examples, 0);
}

TEST(Union, SuccessInEitherRunCounts) {
  auto rec = [](const char* id, const char* s) { return nlohmann::json{{"id", id}, {"status", s}}; };
  const std::vector<nlohmann::json> a{rec("1", "success"), rec("2", "success"), rec("3", "failed"), rec("4", "failed")};
  const std::vector<nlohmann::json> b{rec("4", "failed"), rec("3", "success"), rec("2", "success"), rec("1", "failed")};
  const auto u = union_success(a, b);
  EXPECT_DOUBLE_EQ(u.adv_accuracy_a, 0.5);
  EXPECT_DOUBLE_EQ(u.adv_accuracy_b, 0.5);
  EXPECT_DOUBLE_EQ(u.adv_accuracy_union, 0.25);
  EXPECT_DOUBLE_EQ(u.orig_accuracy, 1.0);

  const auto self = union_success(a, a);
  EXPECT_DOUBLE_EQ(self.adv_accuracy_union, self.adv_accuracy_a);

  const std::vector<nlohmann::json> short_b{rec("1", "failed")};
  EXPECT_THROW(union_success(a, short_b), std::invalid_argument);
  std::vector<nlohmann::json> renamed = b;
  renamed[0]["id"] = "9";
  EXPECT_THROW(union_success(a, renamed), std::invalid_argument);
  std::vector<nlohmann::json> dup = a;
  dup[1]["id"] = "1";
  EXPECT_THROW(union_success(dup, b), std::invalid_argument);
}

TEST(Union, TwentyExampleFixture) {
  const auto a = read_jsonl(test::fixture("union_a.jsonl"));
  const auto b = read_jsonl(test::fixture("union_b.jsonl"));
  std::ifstream in(test::fixture("union_expected.json"));
  const auto want = nlohmann::json::parse(in);
  const auto got = union_success(a, b).to_json();
  for (const auto& [k, v] : want.items()) EXPECT_NEAR(got.at(k).get<double>(), v.get<double>(), 1e-12) << k;
}

TEST(Augment, AppendsSuccessfulExamples) {
  const auto& train = test::toy_data().sentiment_train;
  const std::vector<LabeledText> head(train.begin(), train.begin() + 10);
  const auto in = temp("train.jsonl"), out = temp("aug.jsonl");
  write_dataset(in, head);
  {
    std::ofstream app(in, std::ios::app);
    app << "\n";  // blank lines survive the copy
  }

  std::vector<AttackResult> none{result(head[0].id, AttackStatus::kFailed)};
  auto rep = export_augmented(in, none, out);
  EXPECT_EQ(rep.original, 10);
  EXPECT_EQ(rep.added, 0);
  EXPECT_EQ(lines_of(out), lines_of(in));

  std::vector<AttackResult> some;
  for (int i : {2, 5, 7}) {
    auto r = result(head[static_cast<std::size_t>(i)].id, AttackStatus::kSuccess);
    r.original = head[static_cast<std::size_t>(i)];
    r.adversarial = head[static_cast<std::size_t>(i)];
    some.push_back(r);
  }
  auto wrong = some[0];
  wrong.original.label = wrong.original.label == "positive" ? "negative" : "positive";
  some.push_back(wrong);
  rep = export_augmented(in, some, out);
  EXPECT_EQ(rep.added, 3);
  EXPECT_EQ(rep.skipped, 1);
  EXPECT_EQ(lines_of(out).size(), lines_of(in).size() + 3);
  const auto records = read_dataset(out);
  ASSERT_EQ(records.size(), 13u);
  EXPECT_EQ(records[10].label, head[2].label);
  EXPECT_EQ(records[10].id, head[2].id + "#adv");
  fs::remove(in);
  fs::remove(out);
}

TEST(RunAttacks, ParallelOutputEqualsSerial) {
  const test::TriggerTarget target(triggers(), 2.0, 2.0);
  const auto lm = NgramScorer::train(test::toy_data().corpus);
  const HarnessInputs in{&test::tiny_model(), &target, &lm, &RuleSet::default_rules()};
  RunOptions o;
  o.attack.search.steps = 8;
  o.attack.K = 2;
  o.attack.Z = 3;
  const std::span<const LabeledText> data(test::toy_data().sentiment_test.data(), 16);
  const int before = omp_get_max_threads();
  omp_set_num_threads(4);
  const auto par = run_attacks(data, in, o);
  omp_set_num_threads(before);
  const auto ser = run_attacks_serial(data, in, o);
  ASSERT_EQ(par.size(), ser.size());
  for (std::size_t i = 0; i < par.size(); ++i) EXPECT_EQ(par[i].to_json().dump(), ser[i].to_json().dump()) << i;
}

TEST(Config, ParsesKnownKeysAndRejectsOthers) {
  const auto c = parse_config("[attack]\nK = 2\nS = 40\nmode = random\nquery_budget = 500\n[model]\nlatent = 8\n"
                              "[data]\nmatched_labels = paraphrase, entailment\n");
  EXPECT_EQ(c.attack.K, 2);
  EXPECT_EQ(c.attack.search.steps, 40);
  EXPECT_EQ(c.attack.search.mode, SearchMode::kRandom);
  EXPECT_EQ(c.attack.query_budget, 500);
  EXPECT_EQ(c.model.latent, 8);
  EXPECT_EQ(c.mapping.matched_labels, (std::set<std::string>{"entailment", "paraphrase"}));
  EXPECT_THROW(parse_config("[attack]\nbeam = 3\n"), FormatError);
  EXPECT_THROW(parse_config("[optimizer]\nlr = 3\n"), FormatError);
  EXPECT_THROW(parse_config("[attack]\nK = three\n"), FormatError);
  EXPECT_THROW(parse_config("[attack]\nmode = greedy\n"), FormatError);
  const auto toy = load_config(fs::path(ADVEXP_FIXTURE_DIR) / ".." / ".." / "data" / "toy.ini");
  EXPECT_EQ(toy.attack.search.steps, 80);
  EXPECT_FALSE(toy.attack.query_budget);
}

TEST(Classifiers, BowTrainsAndRoundTrips) {
  const auto& d = test::toy_data();
  const auto bow = BowClassifier::train(d.sentiment_train, {});
  EXPECT_GT(accuracy(bow, d.sentiment_test), 0.8);
  EXPECT_EQ(bow.labels(), collect_labels(d.sentiment_train));
  const auto path = temp("bow.json");
  save_classifier(path, bow);
  const auto back = load_classifier(path);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(back->predict(d.sentiment_test[i]), bow.predict(d.sentiment_test[i]));
  fs::remove(path);

  const auto pair_bow = BowClassifier::train(d.pair_train, {});
  EXPECT_GT(accuracy(pair_bow, d.pair_test), 0.5);
}

TEST(Classifiers, CnnTrainsAndRoundTrips) {
  const auto& d = test::toy_data();
  CnnClassifier::TrainOptions o;
  o.epochs = 4;
  const auto cnn = CnnClassifier::train(d.sentiment_train, o);
  EXPECT_GT(accuracy(cnn, d.sentiment_test), 0.7);
  const auto path = temp("cnn.json");
  save_classifier(path, cnn);
  const auto back = load_classifier(path);
  for (std::size_t i = 0; i < 10; ++i) {
    const auto a = back->predict(d.sentiment_test[i]), b = cnn.predict(d.sentiment_test[i]);
    for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a[k], b[k], 1e-12);
  }
  std::ofstream(path) << "{\"type\": \"svm\"}";
  EXPECT_THROW(load_classifier(path), FormatError);
  fs::remove(path);
}

TEST(Adapter, CountsAndValidates) {
  const test::ConstantTarget ok({"a", "b"}, {0.25, 0.75});
  TargetAdapter adapter(ok);
  const auto t = test::single("(S (NP (PRP She)) (VP (VBD left)) (. .))");
  for (int i = 0; i < 5; ++i) adapter.predict(t);
  EXPECT_EQ(adapter.queries(), 5);
  EXPECT_EQ(adapter.label_index("b"), 1);
  EXPECT_THROW(adapter.label_index("c"), std::invalid_argument);
  EXPECT_EQ(argmax({0.3, 0.7, 0.7}), 1);

  const test::ConstantTarget bad_sum({"a", "b"}, {0.5, 0.6});
  TargetAdapter a2(bad_sum);
  EXPECT_THROW(a2.predict(t), AdapterError);
  EXPECT_EQ(a2.queries(), 1);
  const test::ConstantTarget bad_size({"a", "b"}, {1.0});
  TargetAdapter a3(bad_size);
  EXPECT_THROW(a3.predict(t), AdapterError);
}

TEST(Adapter, ExternalProcessTarget) {
  if (std::system("command -v python3 >/dev/null 2>&1") != 0) GTEST_SKIP() << "python3 not available";
  const std::string script =
      "import sys,json\n"
      "for l in sys.stdin:\n"
      "  t=json.loads(l)['text']\n"
      "  p=0.2 if 'bad' in (t if isinstance(t,str) else ' '.join(t)) else 0.9\n"
      "  print(json.dumps({'probs':[p,1-p]}),flush=True)\n";
  const auto path = temp("target.py");
  std::ofstream(path) << script;
  ExternalTarget ext("exec:python3 " + path.string(), {"positive", "negative"});
  EXPECT_NEAR(ext.predict(test::single("(S (NP (PRP It)) (VP (VBD was) (ADJP (JJ bad))) (. .))"))[0], 0.2, 1e-12);
  EXPECT_NEAR(ext.predict(test::single("(S (NP (PRP It)) (VP (VBD was) (ADJP (JJ good))) (. .))"))[0], 0.9, 1e-12);
  fs::remove(path);
}
