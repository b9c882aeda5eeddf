// End-to-end acceptance run over the bundled toy data. Prints one PASS/FAIL
// line per criterion and exits non-zero if any fails.

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "advexp/classifiers.hpp"
#include "advexp/config.hpp"
#include "advexp/harness.hpp"
#include "advexp/scorer.hpp"
#include "support.hpp"

using namespace advexp;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Tolerances.
constexpr double kSweepSeconds = 600.0;
constexpr int kPerKind = 200;
constexpr double kFdTolerance = 1e-4;
constexpr double kMcKlTolerance = 0.01;
constexpr int kPlantedRuns = 20;
constexpr int kPlantedWins = 16;
constexpr int kBeamStreams = 1000;
constexpr double kMinReinforceRate = 0.30;
constexpr long kBudget = 150;
constexpr int kAugmentSeeds = 3;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [violated: " << what << "]";
    }
  }
};

std::map<int, std::pair<bool, std::string>> g_lines;

void report(int id, const std::string& title, Outcome& o) {
  g_lines[id] = {o.pass, title + ": " + o.detail.str()};
  std::printf("criterion %2d %s  %s: %s\n", id, o.pass ? "PASS" : "FAIL", title.c_str(), o.detail.str().c_str());
  std::fflush(stdout);
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

/// Counts predict calls independently of the adapter.
class CountingTarget : public TargetModel {
 public:
  explicit CountingTarget(const TargetModel& inner) : inner_(inner) {}
  [[nodiscard]] std::vector<std::string> labels() const override { return inner_.labels(); }
  [[nodiscard]] std::vector<double> predict(const LabeledText& t) const override {
    ++calls_;
    return inner_.predict(t);
  }
  [[nodiscard]] bool concurrent() const override { return inner_.concurrent(); }
  long take() { return calls_.exchange(0); }

 private:
  const TargetModel& inner_;
  mutable std::atomic<long> calls_{0};
};

struct Sweep {
  std::vector<AttackResult> results;
  std::vector<long> counted;  // independent per-example query counts
  double seconds = 0;
};

Sweep sweep(std::span<const LabeledText> data, const TargetModel& target, const GenerativeModel& model,
            const PerplexityScorer& lm, const AttackConfig& cfg) {
  CountingTarget counting(target);
  const HarnessInputs in{&model, &counting, &lm, &RuleSet::default_rules()};
  Sweep s;
  RunOptions o;
  o.attack = cfg;
  o.on_result = [&](const AttackResult&) { s.counted.push_back(counting.take()); };
  const auto t0 = Clock::now();
  s.results = run_attacks_serial(data, in, o);
  s.seconds = seconds_since(t0);
  return s;
}

std::string jsonl(const std::vector<AttackResult>& rs) {
  std::string out;
  for (const auto& r : rs) out += r.to_json().dump() + "\n";
  return out;
}

/// Tokens present in `expanded` beyond those of `original`, commas excluded;
/// nullopt if `original` is not contained in `expanded` as a multiset.
std::optional<std::multiset<std::string>> inserted_tokens(const std::vector<std::string>& original,
                                                          const std::vector<std::string>& expanded) {
  std::multiset<std::string> bag(expanded.begin(), expanded.end());
  for (const auto& w : original) {
    auto it = bag.find(w);
    if (it == bag.end()) return std::nullopt;
    bag.erase(it);
  }
  bag.erase(",");
  return bag;
}

std::multiset<std::string> recorded_tokens(const AttackResult& r, int sentence) {
  std::multiset<std::string> bag;
  for (const auto& ins : r.insertions)
    if (ins.pos.sentence == sentence)
      for (const auto& w : ins.modifier.tokens)
        if (w != ",") bag.insert(w);
  return bag;
}

double total_loss(const GenerativeModel& m, const TrainingTriple& t, const nn::Vector& eps) {
  const auto p = m.example_loss(t, eps, nullptr);
  return p.reconstruction + p.kl + p.type;
}

double worst_fd_error() {
  CvaeConfig c;
  c.embed_dim = 5;
  c.hidden = 6;
  c.latent = 4;
  c.type_dim = 3;
  c.max_decode_len = 6;
  c.init_scale = 0.3;
  GenerativeModel m(c, Vocabulary::from_tokens({"the", "girl", "who", "sings", "a", "song", "in", "red"}), "fd", 5);
  std::mt19937_64 rng(17);
  double worst = 0;
  const std::vector<TrainingTriple> cases{{{"the", "girl"}, ModifierType::kCl, {"who", "sings", "a", "song"}},
                                          {{"a", "song"}, ModifierType::kPp, {"in", "red"}}};
  for (const auto& t : cases) {
    const nn::Vector eps = nn::standard_normal(rng, 4);
    nn::Gradients g(m.params());
    g.zero();
    m.example_loss(t, eps, &g);
    auto& params = m.mutable_params();
    for (std::size_t id = 0; id < params.size(); ++id) {
      auto& value = params.value(static_cast<int>(id));
      nn::Matrix numeric(value.rows(), value.cols());
      for (Eigen::Index k = 0; k < value.size(); ++k) {
        const double keep = value.data()[k];
        value.data()[k] = keep + 1e-5;
        const double up = total_loss(m, t, eps);
        value.data()[k] = keep - 1e-5;
        const double down = total_loss(m, t, eps);
        value.data()[k] = keep;
        numeric.data()[k] = (up - down) / 2e-5;
      }
      const auto& analytic = g[static_cast<int>(id)];
      const double denom = std::max({analytic.norm(), numeric.norm(), 1e-8});
      worst = std::max(worst, (analytic - numeric).norm() / denom);
    }
  }
  return worst;
}

double worst_mc_kl_error() {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const double log2pi = std::log(2.0 * M_PI);
  auto logpdf = [&](const nn::Vector& z, const GaussianParams& g) {
    double s = 0;
    for (Eigen::Index i = 0; i < z.size(); ++i)
      s -= 0.5 * (log2pi + g.log_variance(i) + std::pow(z(i) - g.mean(i), 2) / std::exp(g.log_variance(i)));
    return s;
  };
  double worst = 0;
  for (int trial = 0; trial < 3; ++trial) {
    GaussianParams q{nn::Vector(8), nn::Vector(8)}, p{nn::Vector(8), nn::Vector(8)};
    for (int i = 0; i < 8; ++i) {
      q.mean(i) = u(rng);
      p.mean(i) = u(rng);
      q.log_variance(i) = 0.5 * u(rng);
      p.log_variance(i) = 0.5 * u(rng);
    }
    const double exact = kl_gaussians(q, p);
    double acc = 0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
      const nn::Vector z =
          q.mean + ((0.5 * q.log_variance.array()).exp() * nn::standard_normal(rng, 8).array()).matrix();
      acc += logpdf(z, q) - logpdf(z, p);
    }
    worst = std::max(worst, std::abs(acc / n - exact) / exact);
  }
  return worst;
}

bool beam_oracle_agrees(int streams) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < streams; ++trial) {
    const int Z = 1 + static_cast<int>(rng() % 6);
    std::vector<BeamItem> beam, fresh;
    long order = 0;
    const auto nb = rng() % 6, nf = rng() % 25;
    auto make = [&] {
      BeamItem b;
      b.adv_score = static_cast<double>(rng() % 6) / 5.0;
      b.order = order++;
      return b;
    };
    for (std::size_t i = 0; i < nb; ++i) beam.push_back(make());
    for (std::size_t i = 0; i < nf; ++i) fresh.push_back(make());
    std::vector<BeamItem> pool = beam;
    pool.insert(pool.end(), fresh.begin(), fresh.end());
    // Sort-and-truncate oracle: order by score, then by arrival.
    std::vector<std::size_t> idx(pool.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (std::size_t i = 0; i < idx.size(); ++i)
      for (std::size_t j = i + 1; j < idx.size(); ++j) {
        const auto& a = pool[idx[i]];
        const auto& b = pool[idx[j]];
        if (b.adv_score > a.adv_score || (b.adv_score == a.adv_score && b.order < a.order)) std::swap(idx[i], idx[j]);
      }
    const auto got = beam_update(beam, fresh, Z);
    if (got.size() != std::min<std::size_t>(pool.size(), static_cast<std::size_t>(Z))) return false;
    for (std::size_t i = 0; i < got.size(); ++i)
      if (got[i].order != pool[idx[i]].order) return false;
  }
  return true;
}

}  // namespace

int main() {
  const auto t_start = Clock::now();
  const auto work = fs::temp_directory_path() / "advexp_acceptance";
  fs::create_directories(work);

  // Shared setup: data, targets, scorer, generative model.
  const AppConfig app = load_config(ADVEXP_TOY_CONFIG);
  toy::Options data_opts;
  data_opts.pair_test = 2 * kPerKind;
  const auto data = toy::generate(data_opts);
  const auto bow_single = BowClassifier::train(data.sentiment_train, {});
  const auto bow_pair = BowClassifier::train(data.pair_train, {});
  const auto lm = NgramScorer::train(data.corpus);
  const auto triples = extract_training_triples(data.corpus);
  long negative_kl_batches = 0, batches = 0;
  PretrainOptions pre = app.pretrain;
  pre.on_step = [&](int, const BatchLoss& l) {
    ++batches;
    if (!(l.kl >= 0.0)) ++negative_kl_batches;
  };
  auto t0 = Clock::now();
  const GenerativeModel model = pretrain(triples, app.model, pre);
  std::printf("setup: %zu triples, CVAE pretrained in %.1f s; bow accuracy single %.3f pair %.3f\n", triples.size(),
              seconds_since(t0), accuracy(bow_single, data.sentiment_test), accuracy(bow_pair, data.pair_test));
  const auto checksum = model.params().checksum();
  const AttackConfig cfg = app.attack;

  // Main sweep, reused by several criteria.
  auto single = sweep(data.sentiment_test, bow_single, model, lm, cfg);
  auto pairs = sweep(data.pair_test, bow_pair, model, lm, cfg);
  const bool sweep_kept_checksum = model.params().checksum() == checksum;
  std::vector<const AttackResult*> all;
  std::vector<long> counted;
  for (auto* s : {&single, &pairs}) {
    for (const auto& r : s->results) all.push_back(&r);
    counted.insert(counted.end(), s->counted.begin(), s->counted.end());
  }

  {  // 1. Expansion-only invariant
    Outcome o;
    std::map<TaskKind, int> per_kind;
    long returned = 0, successes = 0, bad_sub = 0, not_fooled = 0;
    for (const auto* r : all) {
      ++per_kind[r->original.kind];
      if (!r->adversarial) continue;
      ++returned;
      bad_sub += !is_subsequence(r->original, *r->adversarial);
      if (r->status == AttackStatus::kSuccess) {
        ++successes;
        const auto& target = r->original.kind == TaskKind::kSingle ? static_cast<const TargetModel&>(bow_single)
                                                                    : static_cast<const TargetModel&>(bow_pair);
        const auto probs = target.predict(*r->adversarial);
        const auto labels = target.labels();
        not_fooled += labels[static_cast<std::size_t>(argmax(probs))] == r->original.label;
      }
    }
    const double secs = single.seconds + pairs.seconds;
    o.detail << returned << " adversarial texts (" << successes << " successes), " << bad_sub
             << " not supersequences, " << not_fooled << " successes not flipping the target; examples single "
             << per_kind[TaskKind::kSingle] << " matched " << per_kind[TaskKind::kPairMatched] << " unmatched "
             << per_kind[TaskKind::kPairUnmatched] << "; sweep " << secs << " s";
    o.require(bad_sub == 0 && not_fooled == 0, "every returned text is an expansion and every success flips the target");
    for (auto k : {TaskKind::kSingle, TaskKind::kPairMatched, TaskKind::kPairUnmatched})
      o.require(per_kind[k] >= kPerKind, ">= 200 examples per task kind");
    o.require(secs < kSweepSeconds, "sweep under 10 minutes");
    report(1, "expansion-only invariant", o);
  }

  {  // 2. Matched-case rule
    Outcome o;
    long matched = 0, violations = 0;
    for (const auto& r : pairs.results) {
      if (r.original.kind != TaskKind::kPairMatched || r.status != AttackStatus::kSuccess) continue;
      ++matched;
      const auto a = inserted_tokens(r.original.sentences[0].tokens(), r.adversarial->sentences[0].tokens());
      const auto b = inserted_tokens(r.original.sentences[1].tokens(), r.adversarial->sentences[1].tokens());
      bool ok = a && b && *a == *b && !a->empty();
      ok = ok && *a == recorded_tokens(r, 1) && *b == recorded_tokens(r, 2);
      // Every recorded insertion is mirrored in the other sentence.
      for (const auto& x : r.insertions) {
        bool mirrored = false;
        for (const auto& y : r.insertions)
          mirrored |= y.pos.sentence != x.pos.sentence && y.modifier.tokens == x.modifier.tokens;
        ok = ok && mirrored;
      }
      violations += !ok;
    }
    o.detail << matched << " matched-pair successes, " << violations << " violations";
    o.require(matched > 0, "at least one matched-pair success to check");
    o.require(violations == 0, "identical insertions in both sentences");
    report(2, "matched-case rule", o);
  }

  {  // 3. Ill-formedness guard
    Outcome o;
    const auto records = read_jsonl(test::fixture("instructions_gold.jsonl"));
    long mismatches = 0, repeats = 0, instructions = 0;
    for (const auto& rec : records) {
      const Sentence s(parse_ptb(rec["tree"].get<std::string>()));
      const auto got = extract_candidates(s, 1);
      const auto& gold = rec["instructions"];
      if (got.size() != gold.size()) {
        ++mismatches;
        continue;
      }
      for (std::size_t i = 0; i < got.size(); ++i) {
        ++instructions;
        std::string types;
        for (const auto& t : gold[i]["types"]) types += (types.empty() ? "" : "/") + t.get<std::string>();
        const bool same = join(got[i].constituent) == gold[i]["constituent"].get<std::string>() &&
                          to_string(got[i].allowed_types) == types && got[i].positions.size() == 1 &&
                          got[i].positions[0] == Position{1, gold[i]["word"].get<int>()} &&
                          got[i].targets[0].span == Span{gold[i]["span"][0].get<int>(), gold[i]["span"][1].get<int>()};
        mismatches += !same;
        const auto& ref = got[i].targets[0];
        const std::string cat = ref.rule == "noun-phrase" ? "NP" : ref.rule == "verb-phrase" ? "VP" : "S";
        const ParseTree* node = test::find_node(s.tree(), ref.span, cat);
        repeats += node == nullptr || !(got[i].allowed_types & test::oracle_existing(*node)).empty();
      }
    }
    o.detail << records.size() << " trees, " << instructions << " instructions, " << mismatches << " gold mismatches, "
             << repeats << " repeated attached types";
    o.require(records.size() >= 20, ">= 20 fixture trees");
    o.require(mismatches == 0 && repeats == 0, "exact gold match without repeated types");
    report(3, "ill-formedness guard", o);
  }

  {  // 4. CVAE correctness
    Outcome o;
    const double fd = worst_fd_error();
    const double mc = worst_mc_kl_error();
    o.detail << "worst finite-difference relative error " << fd << ", worst Monte-Carlo KL relative error " << mc
             << ", " << negative_kl_batches << "/" << batches << " batches with negative KL";
    o.require(fd < kFdTolerance, "gradients within 1e-4");
    o.require(mc < kMcKlTolerance, "KL within 1%");
    o.require(negative_kl_batches == 0 && batches > 0, "KL >= 0 on every batch");
    report(4, "CVAE correctness", o);
  }

  {  // 5. REINFORCE contract
    Outcome o;
    long nonzero_kl = 0, checked_kl = 0;
    for (std::size_t i = 0; i < 20; ++i) {
      const auto& text = data.sentiment_test[i];
      AdversarialPrior adv(model);
      std::mt19937_64 rng(i);
      for (const auto& ins : build_instructions(text)) {
        const auto enc = model.encode(ins.constituent_norm());
        for (auto t : ins.allowed_types.to_vector()) {
          ++checked_kl;
          nonzero_kl += regularizer(adv, enc, t, 1, rng).kl != 0.0;
        }
      }
    }
    const test::TriggerTarget planted([] {
      const auto& w = toy::negative_words();
      return std::set<std::string>(w.begin(), w.end());
    }());
    const auto text = test::single("(S (NP (DT The) (NN waiter)) (VP (VBD was) (ADJP (JJ great))) (. .))");
    const auto instructions = build_instructions(text);
    const InsertionInstruction* np = nullptr;
    for (const auto& ins : instructions)
      if (join(ins.constituent) == "The waiter") np = &ins;
    int wins = 0;
    long checksum_changes = 0;
    double early_mean = 0, late_mean = 0;
    SearchConfig sc = cfg.search;
    const int S = sc.steps;
    for (int seed = 0; seed < kPlantedRuns && np; ++seed) {
      TargetAdapter adapter(planted);
      const Expansion root{&text, {}};
      SearchRequest req{&model, &adapter, np, &root, 0};
      req.type = ModifierType::kAppos;
      std::mt19937_64 rng(static_cast<std::uint64_t>(seed));
      const auto before = model.params().checksum();
      const auto out = reinforce_search(req, sc, rng);
      checksum_changes += model.params().checksum() != before;
      double early = 0, late = 0;
      for (int k = 0; k < 10; ++k) {
        early += out.candidates[static_cast<std::size_t>(k)].adv_score / 10;
        late += out.candidates[static_cast<std::size_t>(S - 10 + k)].adv_score / 10;
      }
      wins += late > early;
      early_mean += early / kPlantedRuns;
      late_mean += late / kPlantedRuns;
    }
    o.detail << "checksum unchanged over the sweep: " << (sweep_kept_checksum ? "yes" : "no") << ", changed in "
             << checksum_changes << "/" << kPlantedRuns << " planted calls; KL at init nonzero in " << nonzero_kl << "/"
             << checked_kl << "; planted trigger late > early in " << wins << "/" << kPlantedRuns << " runs (mean "
             << early_mean << " -> " << late_mean << ")";
    o.require(np != nullptr, "planted instruction present");
    o.require(sweep_kept_checksum && checksum_changes == 0, "pretrained parameters untouched");
    o.require(nonzero_kl == 0 && checked_kl > 0, "KL exactly 0 at initialisation");
    o.require(wins >= kPlantedWins, ">= 16 of 20 runs improve");
    report(5, "REINFORCE contract", o);
  }

  {  // 6. Beam-search semantics
    Outcome o;
    const bool oracle = beam_oracle_agrees(kBeamStreams);
    long decreasing = 0;
    for (const auto* r : all)
      for (std::size_t k = 1; k < r->trace.size(); ++k) decreasing += r->trace[k] < r->trace[k - 1];
    o.detail << "beam_update vs oracle on " << kBeamStreams << " streams: " << (oracle ? "equal" : "DIFFERENT") << "; "
             << decreasing << " decreasing steps over " << all.size() << " traces";
    o.require(oracle, "oracle agreement");
    o.require(decreasing == 0, "non-decreasing traces");
    report(6, "beam-search semantics", o);
  }

  {  // 7. Attack effectiveness
    Outcome o;
    AttackConfig rcfg = cfg;
    rcfg.search.mode = SearchMode::kRandom;
    const auto random = sweep(data.sentiment_test, bow_single, model, lm, rcfg);
    const auto mr = evaluate(random.results);
    const auto mi = evaluate(single.results);
    o.detail << "success rate reinforce " << mi.attack_success_rate << " vs random " << mr.attack_success_rate
             << " (adv accuracy " << mi.adv_accuracy << " vs " << mr.adv_accuracy << ", orig " << mi.orig_accuracy << ")";
    o.require(mi.attack_success_rate >= mr.attack_success_rate, "reinforce >= random");
    o.require(mi.attack_success_rate >= kMinReinforceRate, "reinforce >= 30%");
    report(7, "attack effectiveness", o);
  }

  {  // 8. Budget accounting
    Outcome o;
    long mismatched = 0, wrong_scoring = 0, attacked_single = 0;
    double beam_excess = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      const auto* r = all[i];
      mismatched += r->queries_used != counted[i] || r->queries_used != r->queries.total();
      if (r->original.kind == TaskKind::kSingle && r->clean_correct && r->instructions_total > 0 &&
          r->status != AttackStatus::kError) {
        ++attacked_single;
        wrong_scoring += r->queries.scoring != static_cast<long>(cfg.K) * cfg.search.steps;
        beam_excess += static_cast<double>(r->queries.beam);
      }
    }
    AttackConfig bcfg = cfg;
    bcfg.query_budget = kBudget;
    const auto budgeted = sweep(std::span(data.sentiment_test).first(50), bow_single, model, lm, bcfg);
    long over = 0;
    for (std::size_t i = 0; i < budgeted.results.size(); ++i) {
      const auto& r = budgeted.results[i];
      over += r.queries_used > kBudget || budgeted.counted[i] > kBudget;
      mismatched += r.queries_used != budgeted.counted[i];
    }
    o.detail << mismatched << " counter mismatches over " << all.size() + budgeted.results.size() << " examples; "
             << wrong_scoring << "/" << attacked_single << " single-text attacks with scoring != "
             << cfg.K * cfg.search.steps << "; mean beam-phase queries " << beam_excess / std::max(1L, attacked_single)
             << "; " << over << " examples over a budget of " << kBudget;
    o.require(mismatched == 0, "queries_used equals the counter");
    o.require(wrong_scoring == 0 && attacked_single > 0, "scoring queries = K*S");
    o.require(over == 0, "budget respected");
    report(8, "budget accounting", o);
  }

  {  // 9. Adversarial training direction
    Outcome o;
    int improved = 0;
    const auto train_path = work / "train.jsonl";
    const auto aug_path = work / "augmented.jsonl";
    write_dataset(train_path, data.sentiment_train);
    o.detail << "adv accuracy base -> augmented:";
    for (int seed = 1; seed <= kAugmentSeeds; ++seed) {
      BowClassifier::TrainOptions to;
      to.seed = static_cast<std::uint64_t>(seed);
      AttackConfig acfg = cfg;
      acfg.seed = static_cast<std::uint64_t>(seed);
      const auto base = BowClassifier::train(data.sentiment_train, to);
      const auto on_train = sweep(data.sentiment_train, base, model, lm, acfg);
      const auto rep = export_augmented(train_path, on_train.results, aug_path);
      const auto augmented = BowClassifier::train(read_dataset(aug_path), to);
      const double before = evaluate(sweep(data.sentiment_test, base, model, lm, acfg).results).adv_accuracy;
      const double after = evaluate(sweep(data.sentiment_test, augmented, model, lm, acfg).results).adv_accuracy;
      improved += after > before;
      o.detail << " seed " << seed << " " << before << " -> " << after << " (+" << rep.added << " texts);";
    }
    o.detail << " improved in " << improved << "/" << kAugmentSeeds;
    o.require(2 * improved > kAugmentSeeds, "majority of seeds improve");
    report(9, "adversarial-training direction", o);
  }

  {  // 10. Determinism
    Outcome o;
    std::vector<LabeledText> subset(data.sentiment_test.begin(), data.sentiment_test.begin() + 40);
    std::vector<LabeledText> pair_subset(data.pair_test.begin(), data.pair_test.begin() + 40);
    auto run = [&](std::span<const LabeledText> d, const TargetModel& target) {
      RunOptions ro;
      ro.attack = cfg;
      return jsonl(run_attacks(d, HarnessInputs{&model, &target, &lm, &RuleSet::default_rules()}, ro));
    };
    const auto a = run(subset, bow_single) + run(pair_subset, bow_pair);
    const auto b = run(subset, bow_single) + run(pair_subset, bow_pair);
    const std::vector<AttackResult> sweep_head(single.results.begin(), single.results.begin() + 40);
    const bool same_as_sweep = run(subset, bow_single) == jsonl(sweep_head);
    std::ofstream(work / "run_a.jsonl") << a;
    std::ofstream(work / "run_b.jsonl") << b;
    o.detail << "two runs over 80 examples " << (a == b ? "byte-identical" : "DIFFER") << " (" << a.size()
             << " bytes); parallel vs serial sweep " << (same_as_sweep ? "identical" : "DIFFER");
    o.require(a == b && same_as_sweep, "byte-identical output");
    report(10, "determinism", o);
  }

  int passed = 0;
  for (const auto& [id, line] : g_lines) passed += line.first;
  std::printf("acceptance: %d/%zu criteria passed in %.0f s\n", passed, g_lines.size(), seconds_since(t_start));
  return passed == static_cast<int>(g_lines.size()) ? 0 : 1;
}
