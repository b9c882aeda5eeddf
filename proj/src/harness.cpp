#include "advexp/harness.hpp"

#include <chrono>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>

#include <omp.h>

#include "advexp/log.hpp"
#include "advexp/seed.hpp"

namespace advexp {

namespace {

class SerializedScorer : public PerplexityScorer {
 public:
  explicit SerializedScorer(const PerplexityScorer& inner) : inner_(inner) {}
  [[nodiscard]] double score(const LabeledText& text) const override {
    std::lock_guard lock(mu_);
    return inner_.score(text);
  }

 private:
  const PerplexityScorer& inner_;
  mutable std::mutex mu_;
};

void check_inputs(const HarnessInputs& in) {
  if (!in.model || !in.target || !in.scorer || !in.rules) throw std::invalid_argument("incomplete harness inputs");
}

}  // namespace

AttackResult attack_example(const LabeledText& text, std::size_t index, const HarnessInputs& in,
                            const RunOptions& options) {
  check_inputs(in);
  const auto t0 = std::chrono::steady_clock::now();
  TargetAdapter adapter(*in.target);
  AttackResult res;
  std::vector<double> clean;
  try {
    clean = adapter.predict(text);
  } catch (const AdapterError& e) {
    res.id = text.id;
    res.original = text;
    res.status = AttackStatus::kError;
    res.error = e.what();
    res.queries_used = res.queries.clean = adapter.queries();
    return res;
  }
  const int label = adapter.label_index(text.label);
  if (argmax(clean) != label) {
    res.id = text.id;
    res.original = text;
    res.status = AttackStatus::kSkipped;
    res.clean_correct = false;
    res.predicted_label = adapter.labels()[static_cast<std::size_t>(argmax(clean))];
    res.adv_score = 1.0 - clean[static_cast<std::size_t>(label)];
    res.trace = {res.adv_score};
    res.queries_used = res.queries.clean = adapter.queries();
  } else {
    AttackConfig cfg = options.attack;
    cfg.seed = derive_seed(options.attack.seed, {index});
    res = attack(AttackInputs{&text, in.model, &adapter, in.scorer, in.rules, clean}, cfg);
  }
  if (options.timing) res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

std::vector<AttackResult> run_attacks_serial(std::span<const LabeledText> data, const HarnessInputs& in,
                                             const RunOptions& options) {
  std::vector<AttackResult> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.push_back(attack_example(data[i], i, in, options));
    if (options.on_result) options.on_result(out.back());
  }
  return out;
}

std::vector<AttackResult> run_attacks(std::span<const LabeledText> data, const HarnessInputs& in,
                                      const RunOptions& options) {
  check_inputs(in);
  std::unique_ptr<SerializedTarget> target_guard;
  std::unique_ptr<SerializedScorer> scorer_guard;
  HarnessInputs shared = in;
  if (!in.target->concurrent()) shared.target = (target_guard = std::make_unique<SerializedTarget>(*in.target)).get();
  if (!in.scorer->concurrent()) shared.scorer = (scorer_guard = std::make_unique<SerializedScorer>(*in.scorer)).get();

  std::vector<AttackResult> out(data.size());
  std::vector<std::exception_ptr> errors(data.size());
  std::mutex report_mu;
  const int threads = options.workers > 0 ? options.workers : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (long i = 0; i < static_cast<long>(data.size()); ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = attack_example(data[k], k, shared, options);
      if (options.on_result) {
        std::lock_guard lock(report_mu);
        options.on_result(out[k]);
      }
    } catch (...) {
      errors[k] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {
nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
double ratio(long a, long b) { return b > 0 ? static_cast<double>(a) / static_cast<double>(b) : 0.0; }
}  // namespace

nlohmann::json EvalMetrics::to_json() const {
  return {{"examples", examples},
          {"errors", errors},
          {"clean_correct", clean_correct},
          {"attacked", attacked},
          {"successes", successes},
          {"failed", failed},
          {"skipped", skipped},
          {"orig_accuracy", orig_accuracy},
          {"adv_accuracy", adv_accuracy},
          {"attack_success_rate", attack_success_rate},
          {"avg_adv_length", opt(avg_adv_length)},
          {"avg_orig_length_of_successes", opt(avg_orig_length_of_successes)},
          {"orig_accuracy_on_long", opt(orig_accuracy_on_long)},
          {"long_examples", long_examples},
          {"mean_queries", mean_queries},
          {"mean_scoring_queries", mean_scoring_queries},
          {"mean_beam_queries", mean_beam_queries},
          {"max_queries", max_queries},
          {"skipped_fraction", skipped_fraction},
          {"mean_perplexity", opt(mean_perplexity)}};
}

EvalMetrics evaluate(std::span<const AttackResult> results) {
  EvalMetrics m;
  double adv_len = 0, orig_len = 0, ppl = 0, queries = 0, scoring = 0, beam = 0;
  long ppl_n = 0;
  for (const auto& r : results) {
    if (r.status == AttackStatus::kError) {
      ++m.errors;
      log::warn("example '" + r.id + "' excluded from metrics: " + r.error.value_or("error"));
      continue;
    }
    ++m.examples;
    if (!r.clean_correct) continue;
    ++m.clean_correct;
    queries += static_cast<double>(r.queries_used);
    scoring += static_cast<double>(r.queries.scoring);
    beam += static_cast<double>(r.queries.beam);
    m.max_queries = std::max(m.max_queries, r.queries_used);
    switch (r.status) {
      case AttackStatus::kSuccess:
        ++m.successes;
        ++m.attacked;
        adv_len += static_cast<double>(r.adversarial ? r.adversarial->token_count() : 0);
        orig_len += static_cast<double>(r.original.token_count());
        if (r.perplexity) {
          ppl += *r.perplexity;
          ++ppl_n;
        }
        break;
      case AttackStatus::kFailed:
        ++m.failed;
        ++m.attacked;
        break;
      default:
        ++m.skipped;
        break;
    }
  }
  m.orig_accuracy = ratio(m.clean_correct, m.examples);
  m.adv_accuracy = ratio(m.clean_correct - m.successes, m.examples);
  m.attack_success_rate = ratio(m.successes, m.clean_correct);
  m.skipped_fraction = ratio(m.skipped, m.clean_correct);
  if (m.clean_correct > 0) {
    const auto n = static_cast<double>(m.clean_correct);
    m.mean_queries = queries / n;
    m.mean_scoring_queries = scoring / n;
    m.mean_beam_queries = beam / n;
  }
  if (m.successes > 0) {
    m.avg_adv_length = adv_len / static_cast<double>(m.successes);
    m.avg_orig_length_of_successes = orig_len / static_cast<double>(m.successes);
    long correct_long = 0;
    for (const auto& r : results) {
      if (r.status == AttackStatus::kError) continue;
      if (static_cast<double>(r.original.token_count()) > *m.avg_adv_length) {
        ++m.long_examples;
        if (r.clean_correct) ++correct_long;
      }
    }
    if (m.long_examples > 0) m.orig_accuracy_on_long = ratio(correct_long, m.long_examples);
  }
  if (ppl_n > 0) m.mean_perplexity = ppl / static_cast<double>(ppl_n);
  return m;
}

// ---------------------------------------------------------------------------
// Union

nlohmann::json UnionReport::to_json() const {
  return {{"examples", examples},
          {"orig_accuracy", orig_accuracy},
          {"adv_accuracy_a", adv_accuracy_a},
          {"adv_accuracy_b", adv_accuracy_b},
          {"adv_accuracy_union", adv_accuracy_union}};
}

namespace {

struct UnionRecord {
  bool success = false;
  bool clean_correct = true;
};

std::map<std::string, UnionRecord> union_records(std::span<const nlohmann::json> records, const char* which) {
  std::map<std::string, UnionRecord> out;
  for (const auto& r : records) {
    if (!r.contains("id") || !r.contains("status"))
      throw std::invalid_argument(std::string("result set ") + which + ": records need id and status");
    const std::string id = r["id"].is_string() ? r["id"].get<std::string>() : r["id"].dump();
    UnionRecord u{r["status"].get<std::string>() == "success", r.value("clean_correct", true)};
    if (!out.emplace(id, u).second) throw std::invalid_argument(std::string("result set ") + which + ": duplicate id " + id);
  }
  return out;
}

}  // namespace

UnionReport union_success(std::span<const nlohmann::json> a, std::span<const nlohmann::json> b) {
  const auto ra = union_records(a, "a");
  const auto rb = union_records(b, "b");
  if (ra.size() != rb.size()) throw std::invalid_argument("result sets cover different examples");
  UnionReport rep;
  long correct = 0, held_a = 0, held_b = 0, held_u = 0;
  for (const auto& [id, x] : ra) {
    auto it = rb.find(id);
    if (it == rb.end()) throw std::invalid_argument("id '" + id + "' missing from the second result set");
    const auto& y = it->second;
    ++rep.examples;
    if (!(x.clean_correct && y.clean_correct)) continue;
    ++correct;
    held_a += !x.success;
    held_b += !y.success;
    held_u += !(x.success || y.success);
  }
  rep.orig_accuracy = ratio(correct, rep.examples);
  rep.adv_accuracy_a = ratio(held_a, rep.examples);
  rep.adv_accuracy_b = ratio(held_b, rep.examples);
  rep.adv_accuracy_union = ratio(held_u, rep.examples);
  return rep;
}

// ---------------------------------------------------------------------------
// Augmentation

AugmentReport export_augmented(const std::filesystem::path& train, std::span<const AttackResult> results,
                               const std::filesystem::path& out) {
  std::ifstream in(train);
  if (!in) throw std::runtime_error("cannot open " + train.string());
  std::ofstream os(out);
  if (!os) throw std::runtime_error("cannot write " + out.string());

  AugmentReport rep;
  std::map<std::string, std::string> gold;  // id -> label
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    os << line << '\n';
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto rec = nlohmann::json::parse(line);
    std::string id = rec.contains("id") ? (rec["id"].is_string() ? rec["id"].get<std::string>() : rec["id"].dump())
                                        : std::to_string(n);
    const auto& label = rec.at("label");
    gold[id] = label.is_string() ? label.get<std::string>() : label.dump();
    ++rep.original;
    ++n;
  }
  for (const auto& r : results) {
    if (r.status != AttackStatus::kSuccess || !r.adversarial) continue;
    auto it = gold.find(r.id);
    if (it == gold.end() || it->second != r.original.label) {
      log::warn("augment: result '" + r.id + "' does not match a training record with the same label; skipped");
      ++rep.skipped;
      continue;
    }
    auto rec = text_to_json(*r.adversarial);
    rec["id"] = r.id + "#adv";
    rec["label"] = r.original.label;
    rec["source_id"] = r.id;
    auto& ins = rec["insertions"] = nlohmann::json::array();
    for (const auto& i : r.insertions)
      ins.push_back({{"sentence", i.pos.sentence},
                     {"word", i.pos.word},
                     {"type", std::string(to_string(i.modifier.type))},
                     {"modifier", i.modifier.tokens}});
    os << rec.dump() << '\n';
    ++rep.added;
  }
  return rep;
}

}  // namespace advexp
