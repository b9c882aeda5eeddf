#include "advexp/orchestrator.hpp"

#include <algorithm>
#include <exception>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <omp.h>

#include "advexp/seed.hpp"

namespace advexp {

void AttackConfig::validate() const {
  if (K < 1) throw std::invalid_argument("K must be >= 1");
  if (Z < 1) throw std::invalid_argument("Z must be >= 1");
  if (query_budget && *query_budget < 1) throw std::invalid_argument("query budget must be >= 1");
  search.validate();
}

namespace {
constexpr const char* kStatusNames[] = {"success", "failed", "skipped", "error"};
}

std::string_view to_string(AttackStatus s) { return kStatusNames[static_cast<int>(s)]; }

std::optional<AttackStatus> parse_attack_status(std::string_view s) {
  for (int i = 0; i < 4; ++i)
    if (s == kStatusNames[i]) return static_cast<AttackStatus>(i);
  return std::nullopt;
}

std::vector<BeamItem> beam_update(const std::vector<BeamItem>& beam, const std::vector<BeamItem>& fresh, int Z) {
  if (Z < 1) throw std::invalid_argument("beam size must be >= 1");
  std::vector<BeamItem> all = beam;
  all.insert(all.end(), fresh.begin(), fresh.end());
  std::stable_sort(all.begin(), all.end(), [](const BeamItem& a, const BeamItem& b) { return a.adv_score > b.adv_score; });
  if (all.size() > static_cast<std::size_t>(Z)) all.resize(static_cast<std::size_t>(Z));
  return all;
}

std::vector<std::size_t> select_instructions(const std::vector<double>& scores, int K) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  if (idx.size() > static_cast<std::size_t>(std::max(K, 0))) idx.resize(static_cast<std::size_t>(std::max(K, 0)));
  return idx;
}

std::size_t finalize(const std::vector<LabeledText>& candidates, const PerplexityScorer& scorer) {
  if (candidates.empty()) throw std::invalid_argument("finalize needs at least one candidate");
  std::size_t best = 0;
  double best_ppl = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const double p = scorer.score(candidates[i]);
    if (p < best_ppl) {
      best_ppl = p;
      best = i;
    }
  }
  return best;
}

std::vector<int> scoring_allocation(int n, int K, int S) {
  if (n < 0 || K < 1 || S < 1) throw std::invalid_argument("bad scoring allocation arguments");
  std::vector<int> out(static_cast<std::size_t>(n));
  if (n == 0) return out;
  const long total = static_cast<long>(K) * S;
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = static_cast<int>(std::max(1L, total / n + (i < total % n ? 1 : 0)));
  return out;
}

ScoredInstruction score_instruction(const InsertionInstruction& instruction, const LabeledText& text, int label,
                                    const GenerativeModel& model, TargetAdapter& target, const SearchConfig& cfg,
                                    int steps, std::uint64_t seed, long max_queries) {
  const Expansion root{&text, {}};
  SearchConfig local = cfg;
  local.steps = steps;
  std::mt19937_64 rng(seed);
  ScoredInstruction out;
  out.outcome = run_search(SearchRequest{&model, &target, &instruction, &root, label, max_queries}, local, rng);
  for (const auto& c : out.outcome.candidates) out.score = std::max(out.score, c.adv_score);
  return out;
}

namespace {

BeamItem to_beam_item(SearchCandidate&& c, long order) {
  return BeamItem{std::move(c.insertions), std::move(c.expanded_text), std::move(c.probs), c.adv_score, order};
}

// Hands out a per-example query budget to jobs in a fixed order, so caps do
// not depend on thread scheduling.
std::vector<long> allocate_caps(const std::vector<long>& wants, std::optional<long> remaining) {
  std::vector<long> caps(wants.size(), -1);
  if (!remaining) return caps;
  long left = std::max(0L, *remaining);
  for (std::size_t i = 0; i < wants.size(); ++i) {
    caps[i] = std::min(wants[i], left);
    left -= caps[i];
  }
  return caps;
}

template <typename F>
void run_jobs(std::size_t n, bool parallel, F&& job) {
  std::vector<std::exception_ptr> errors(n);
  const bool par = parallel && !omp_in_parallel() && n > 1;
#pragma omp parallel for schedule(dynamic) if (par)
  for (long i = 0; i < static_cast<long>(n); ++i) {
    try {
      job(static_cast<std::size_t>(i));
    } catch (...) {
      errors[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string constituent_string(const InsertionInstruction& ins) { return join(ins.constituent); }

}  // namespace

AttackResult attack(const AttackInputs& in, const AttackConfig& cfg) {
  cfg.validate();
  if (!in.text || !in.model || !in.target || !in.scorer || !in.rules) throw std::invalid_argument("incomplete attack inputs");
  const LabeledText& x = *in.text;
  TargetAdapter& target = *in.target;
  const int label = target.label_index(x.label);
  if (in.clean_probs.size() != target.labels().size() || argmax(in.clean_probs) != label)
    throw std::invalid_argument("attack needs a text the target classifies correctly");

  AttackResult res;
  res.id = x.id;
  res.original = x;
  res.queries.clean = target.queries();
  const int S = cfg.search.steps;
  auto remaining = [&]() -> std::optional<long> {
    if (!cfg.query_budget) return std::nullopt;
    return std::max(0L, *cfg.query_budget - target.queries());
  };
  auto close = [&](AttackResult& r) -> AttackResult& {
    r.queries_used = target.queries();
    r.queries.beam = r.queries_used - r.queries.clean - r.queries.scoring;
    return r;
  };

  const double clean_score = 1.0 - in.clean_probs[static_cast<std::size_t>(label)];
  res.trace.push_back(clean_score);
  const auto instructions = build_instructions(x, *in.rules);
  res.instructions_total = static_cast<int>(instructions.size());
  if (instructions.empty()) {
    res.status = AttackStatus::kSkipped;
    return close(res);
  }

  // Stage 1: vulnerability scoring with the K*S budget split across instructions.
  const auto alloc = scoring_allocation(static_cast<int>(instructions.size()), cfg.K, S);
  const auto scoring_caps = allocate_caps(std::vector<long>(alloc.begin(), alloc.end()), remaining());
  std::vector<ScoredInstruction> scored(instructions.size());
  run_jobs(instructions.size(), cfg.parallel, [&](std::size_t i) {
    if (scoring_caps[i] == 0) {
      scored[i].outcome.budget_exhausted = true;
      return;
    }
    scored[i] = score_instruction(instructions[i], x, label, *in.model, target, cfg.search, alloc[i],
                                  derive_seed(cfg.seed, {1, i}), scoring_caps[i]);
  });
  res.queries.scoring = target.queries() - res.queries.clean;
  std::vector<double> scores;
  for (const auto& s : scored) {
    scores.push_back(s.score);
    res.budget_exhausted |= s.outcome.budget_exhausted;
    if (s.outcome.error && !res.error) res.error = s.outcome.error;
  }
  if (res.error) {
    res.status = AttackStatus::kError;
    return close(res);
  }
  const auto selected = select_instructions(scores, cfg.K);
  for (auto i : selected) {
    res.selected.push_back(constituent_string(instructions[i]));
    res.scores.push_back(scores[i]);
  }

  // Stage 2: beam search over the selected instructions in score order.
  std::vector<BeamItem> beam{BeamItem{{}, x, in.clean_probs, clean_score, 0}};
  long order = 0;
  for (std::size_t k = 0; k < selected.size(); ++k) {
    const InsertionInstruction& ins = instructions[selected[k]];
    // Per beam item: reused trial candidates (original text only) and steps still to search.
    std::vector<std::vector<SearchCandidate>> reused(beam.size());
    std::vector<long> wants(beam.size(), 0);
    for (std::size_t b = 0; b < beam.size(); ++b) {
      if (beam[b].insertions.empty()) {
        reused[b] = std::move(scored[selected[k]].outcome.candidates);
        wants[b] = std::max(0L, static_cast<long>(S) - static_cast<long>(reused[b].size()));
      } else if (!Expansion{&x, beam[b].insertions}.occupies(ins)) {
        wants[b] = S;
      }
    }
    const auto caps = allocate_caps(wants, remaining());
    std::vector<SearchOutcome> searched(beam.size());
    run_jobs(beam.size(), cfg.parallel, [&](std::size_t b) {
      if (wants[b] == 0) return;
      if (caps[b] == 0) {
        searched[b].budget_exhausted = true;
        return;
      }
      const Expansion parent{&x, beam[b].insertions};
      SearchConfig local = cfg.search;
      local.steps = static_cast<int>(wants[b]);
      std::mt19937_64 rng(derive_seed(cfg.seed, {2, k, b}));
      searched[b] = run_search(SearchRequest{in.model, &target, &ins, &parent, label, caps[b]}, local, rng);
    });

    std::vector<BeamItem> fresh;
    for (std::size_t b = 0; b < beam.size(); ++b) {
      for (auto& c : reused[b]) fresh.push_back(to_beam_item(std::move(c), ++order));
      for (auto& c : searched[b].candidates) fresh.push_back(to_beam_item(std::move(c), ++order));
      res.budget_exhausted |= searched[b].budget_exhausted;
      if (searched[b].error && !res.error) res.error = searched[b].error;
    }
    ++res.steps_run;
    auto next = beam_update(beam, fresh, cfg.Z);
    res.trace.push_back(next.front().adv_score);
    if (res.error) {
      res.status = AttackStatus::kError;
      return close(res);
    }

    std::vector<const BeamItem*> wins;
    for (const auto& f : fresh)
      if (argmax(f.probs) != label) wins.push_back(&f);
    if (!wins.empty()) {
      std::vector<LabeledText> texts;
      for (const auto* w : wins) texts.push_back(w->text);
      std::size_t best = 0;
      try {
        best = finalize(texts, *in.scorer);
      } catch (const AdapterError& e) {
        res.status = AttackStatus::kError;
        res.error = std::string("scorer: ") + e.what();
        return close(res);
      }
      const BeamItem& w = *wins[best];
      res.status = AttackStatus::kSuccess;
      res.adversarial = w.text;
      res.insertions = w.insertions;
      res.adv_score = w.adv_score;
      res.predicted_label = target.labels()[static_cast<std::size_t>(argmax(w.probs))];
      res.perplexity = in.scorer->score(w.text);
      return close(res);
    }
    beam = std::move(next);
    if (auto r = remaining(); r && *r == 0) {
      res.budget_exhausted = true;
      break;
    }
  }

  res.status = AttackStatus::kFailed;
  const BeamItem& top = beam.front();
  res.adv_score = top.adv_score;
  res.predicted_label = target.labels()[static_cast<std::size_t>(argmax(top.probs))];
  if (!top.insertions.empty()) {
    res.adversarial = top.text;
    res.insertions = top.insertions;
  }
  return close(res);
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json insertion_to_json(const Insertion& ins) {
  nlohmann::json j{{"sentence", ins.pos.sentence},
                   {"word", ins.pos.word},
                   {"type", std::string(to_string(ins.modifier.type))},
                   {"modifier", ins.modifier.tokens}};
  j["attach"] = ins.attach ? nlohmann::json{ins.attach->start, ins.attach->end} : nlohmann::json(nullptr);
  return j;
}

Insertion insertion_from_json(const nlohmann::json& j) {
  Insertion ins;
  ins.pos = {j.at("sentence").get<int>(), j.at("word").get<int>()};
  const auto type = parse_modifier_type(j.at("type").get<std::string>());
  if (!type) throw FormatError("unknown modifier type in result record");
  ins.modifier = {j.at("modifier").get<std::vector<std::string>>(), *type};
  if (j.contains("attach") && !j["attach"].is_null()) {
    const auto a = j["attach"].get<std::vector<int>>();
    if (a.size() != 2) throw FormatError("attach span needs two values");
    ins.attach = Span{a[0], a[1]};
  }
  return ins;
}

}  // namespace

nlohmann::json AttackResult::to_json() const {
  nlohmann::json j;
  j["id"] = id;
  j["status"] = std::string(to_string(status));
  j["label"] = original.label;
  j["task_kind"] = std::string(to_string(original.kind));
  j["clean_correct"] = clean_correct;
  j["original"] = text_to_json(original);
  j["adversarial"] = adversarial ? text_to_json(*adversarial) : nlohmann::json(nullptr);
  auto& ins = j["insertions"] = nlohmann::json::array();
  for (const auto& i : insertions) ins.push_back(insertion_to_json(i));
  j["predicted_label"] = predicted_label ? nlohmann::json(*predicted_label) : nlohmann::json(nullptr);
  j["adv_score"] = adv_score;
  j["perplexity"] = perplexity ? nlohmann::json(*perplexity) : nlohmann::json(nullptr);
  j["queries_used"] = queries_used;
  j["queries"] = {{"clean", queries.clean}, {"scoring", queries.scoring}, {"beam", queries.beam}};
  j["budget_exhausted"] = budget_exhausted;
  j["instructions_total"] = instructions_total;
  j["selected"] = selected;
  j["scores"] = scores;
  j["steps_run"] = steps_run;
  j["trace"] = trace;
  j["error"] = error ? nlohmann::json(*error) : nlohmann::json(nullptr);
  if (wall_seconds) j["wall_seconds"] = *wall_seconds;
  return j;
}

AttackResult AttackResult::from_json(const nlohmann::json& j) {
  AttackResult r;
  try {
    r.id = j.at("id").get<std::string>();
    const auto st = parse_attack_status(j.at("status").get<std::string>());
    if (!st) throw FormatError("unknown attack status");
    r.status = *st;
    r.original = text_from_json(j.at("original"));
    r.clean_correct = j.value("clean_correct", true);
    if (j.contains("adversarial") && !j["adversarial"].is_null()) r.adversarial = text_from_json(j["adversarial"]);
    for (const auto& i : j.value("insertions", nlohmann::json::array())) r.insertions.push_back(insertion_from_json(i));
    if (j.contains("predicted_label") && !j["predicted_label"].is_null())
      r.predicted_label = j["predicted_label"].get<std::string>();
    r.adv_score = j.value("adv_score", 0.0);
    if (j.contains("perplexity") && !j["perplexity"].is_null()) r.perplexity = j["perplexity"].get<double>();
    r.queries_used = j.value("queries_used", 0L);
    if (j.contains("queries")) {
      const auto& q = j["queries"];
      r.queries = {q.value("clean", 0L), q.value("scoring", 0L), q.value("beam", 0L)};
    }
    r.budget_exhausted = j.value("budget_exhausted", false);
    r.instructions_total = j.value("instructions_total", 0);
    r.selected = j.value("selected", std::vector<std::string>{});
    r.scores = j.value("scores", std::vector<double>{});
    r.steps_run = j.value("steps_run", 0);
    r.trace = j.value("trace", std::vector<double>{});
    if (j.contains("error") && !j["error"].is_null()) r.error = j["error"].get<std::string>();
    if (j.contains("wall_seconds")) r.wall_seconds = j["wall_seconds"].get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed attack result: ") + e.what());
  }
  return r;
}

}  // namespace advexp
