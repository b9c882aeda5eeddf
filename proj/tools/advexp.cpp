// Command-line front end: data generation, training, attacks and reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "advexp/classifiers.hpp"
#include "advexp/config.hpp"
#include "advexp/cvae.hpp"
#include "advexp/harness.hpp"
#include "advexp/log.hpp"
#include "advexp/scorer.hpp"
#include "advexp/toy.hpp"

namespace fs = std::filesystem;
using namespace advexp;

namespace {

AppConfig config_or_default(const std::string& path) { return path.empty() ? AppConfig{} : load_config(path); }

RuleSet rules_for(const AppConfig& cfg, const std::string& override_path) {
  if (!override_path.empty()) return RuleSet::load(override_path);
  if (cfg.rules_path) return RuleSet::load(*cfg.rules_path);
  return RuleSet::default_rules();
}

std::vector<LabeledText> read_all(const std::vector<std::string>& paths, const PairLabelMapping& mapping) {
  std::vector<LabeledText> out;
  for (const auto& p : paths) {
    auto part = read_dataset(p, &mapping);
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

void write_json(const std::string& path, const nlohmann::json& j) {
  if (path.empty() || path == "-") {
    std::cout << j.dump(2) << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

std::vector<AttackResult> read_results(const std::string& path) {
  std::vector<AttackResult> out;
  for (const auto& rec : read_jsonl(path)) out.push_back(AttackResult::from_json(rec));
  return out;
}

std::vector<std::string> split_labels(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s + ",") {
    if (c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else if (c != ' ') {
      cur += c;
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"advexp: black-box adversarial text expansion"};
  app.require_subcommand(1);
  std::string verbosity = "warn";
  app.add_option("--log-level", verbosity, "debug, info, warn or error")->capture_default_str();

  // gen-toy
  auto* gen = app.add_subcommand("gen-toy", "Write the bundled toy datasets and pretraining corpus");
  std::string gen_out;
  toy::Options toy_opts;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--seed", toy_opts.seed)->capture_default_str();
  gen->add_option("--sentiment-train", toy_opts.sentiment_train)->capture_default_str();
  gen->add_option("--sentiment-test", toy_opts.sentiment_test)->capture_default_str();
  gen->add_option("--pair-train", toy_opts.pair_train)->capture_default_str();
  gen->add_option("--pair-test", toy_opts.pair_test)->capture_default_str();
  gen->add_option("--corpus", toy_opts.corpus)->capture_default_str();

  // train-target
  auto* tt = app.add_subcommand("train-target", "Train a bundled bag-of-words or CNN classifier");
  std::vector<std::string> tt_data;
  std::string tt_kind = "bow", tt_out, tt_config;
  int tt_epochs = -1;
  std::uint64_t tt_seed = 1;
  tt->add_option("--dataset", tt_data, "Training JSONL file(s)")->required();
  tt->add_option("--kind", tt_kind, "bow or cnn")->check(CLI::IsMember({"bow", "cnn"}))->capture_default_str();
  tt->add_option("--out", tt_out, "Model JSON path")->required();
  tt->add_option("--config", tt_config, "Config file (for pair label mapping)");
  tt->add_option("--epochs", tt_epochs, "Training epochs (default per kind)");
  tt->add_option("--seed", tt_seed)->capture_default_str();

  // train-scorer
  auto* ts = app.add_subcommand("train-scorer", "Fit the trigram perplexity scorer");
  std::vector<std::string> ts_corpus;
  std::string ts_out;
  ts->add_option("--corpus", ts_corpus, "JSONL text file(s)")->required();
  ts->add_option("--out", ts_out, "Scorer JSON path")->required();

  // pretrain
  auto* pre = app.add_subcommand("pretrain", "Pretrain the modifier generator on a parsed corpus");
  std::vector<std::string> pre_corpus;
  std::string pre_out, pre_config, pre_rules;
  int pre_steps = -1, pre_log_every = 100;
  pre->add_option("--corpus", pre_corpus, "Parsed JSONL corpus file(s)")->required();
  pre->add_option("--out", pre_out, "Checkpoint path")->required();
  pre->add_option("--config", pre_config, "Config file ([model] section)");
  pre->add_option("--rules", pre_rules, "Template rules JSON");
  pre->add_option("--steps", pre_steps, "Override [model] steps");
  pre->add_option("--log-every", pre_log_every)->capture_default_str();

  // attack
  auto* att = app.add_subcommand("attack", "Attack every example of a dataset");
  std::string att_data, att_target, att_ckpt, att_config, att_out, att_scorer, att_labels, att_rules;
  long att_limit = -1;
  int att_workers = -1;
  bool att_serial = false;
  att->add_option("--dataset", att_data, "Dataset JSONL")->required();
  att->add_option("--target", att_target, "Classifier JSON, exec:<cmd> or unix:<path>")->required();
  att->add_option("--checkpoint", att_ckpt, "Generator checkpoint")->required();
  att->add_option("--config", att_config, "Config file")->required();
  att->add_option("--out", att_out, "Results JSONL")->required();
  att->add_option("--scorer", att_scorer, "ngram:<path> or external:<exec:cmd|unix:path>");
  att->add_option("--labels", att_labels, "Comma-separated label order of an external target");
  att->add_option("--rules", att_rules, "Template rules JSON");
  att->add_option("--limit", att_limit, "Attack only the first N examples");
  att->add_option("--workers", att_workers, "Worker threads (overrides [attack] workers)");
  att->add_flag("--serial", att_serial, "Use the serial reference loop");

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Compute metrics from attack results");
  std::string ev_results, ev_out;
  ev->add_option("--results", ev_results, "Results JSONL")->required();
  ev->add_option("--out", ev_out, "Metrics JSON (stdout if omitted)");

  // union
  auto* un = app.add_subcommand("union", "Adversarial accuracy when either of two attacks counts");
  std::string un_a, un_b, un_out;
  un->add_option("--a", un_a, "Results JSONL")->required();
  un->add_option("--b", un_b, "Results JSONL")->required();
  un->add_option("--out", un_out, "Report JSON (stdout if omitted)");

  // augment
  auto* aug = app.add_subcommand("augment", "Append successful adversarial examples to a training set");
  std::string aug_train, aug_results, aug_out;
  aug->add_option("--train", aug_train, "Training JSONL")->required();
  aug->add_option("--results", aug_results, "Results JSONL from attacking the training set")->required();
  aug->add_option("--out", aug_out, "Augmented JSONL")->required();

  CLI11_PARSE(app, argc, argv);

  const std::map<std::string, log::Level> levels = {
      {"debug", log::Level::kDebug}, {"info", log::Level::kInfo}, {"warn", log::Level::kWarn}, {"error", log::Level::kError}};
  if (auto it = levels.find(verbosity); it != levels.end()) log::set_level(it->second);

  try {
    if (*gen) {
      fs::create_directories(gen_out);
      const auto d = toy::generate(toy_opts);
      const fs::path dir(gen_out);
      write_dataset(dir / "sentiment_train.jsonl", d.sentiment_train);
      write_dataset(dir / "sentiment_test.jsonl", d.sentiment_test);
      write_dataset(dir / "pairs_train.jsonl", d.pair_train);
      write_dataset(dir / "pairs_test.jsonl", d.pair_test);
      write_dataset(dir / "corpus.jsonl", d.corpus);
      std::printf("wrote %zu + %zu sentiment, %zu + %zu pair texts and %zu corpus sentences to %s\n",
                  d.sentiment_train.size(), d.sentiment_test.size(), d.pair_train.size(), d.pair_test.size(),
                  d.corpus.size(), gen_out.c_str());
    } else if (*tt) {
      const auto cfg = config_or_default(tt_config);
      const auto data = read_all(tt_data, cfg.mapping);
      if (tt_kind == "bow") {
        BowClassifier::TrainOptions o;
        if (tt_epochs > 0) o.epochs = tt_epochs;
        o.seed = tt_seed;
        const auto m = BowClassifier::train(data, o);
        save_classifier(tt_out, m);
        std::printf("bow: training accuracy %.4f\n", accuracy(m, data));
      } else {
        CnnClassifier::TrainOptions o;
        if (tt_epochs > 0) o.epochs = tt_epochs;
        o.seed = tt_seed;
        const auto m = CnnClassifier::train(data, o);
        save_classifier(tt_out, m);
        std::printf("cnn: training accuracy %.4f\n", accuracy(m, data));
      }
    } else if (*ts) {
      const auto data = read_all(ts_corpus, PairLabelMapping{});
      NgramScorer::train(data).save(ts_out);
      std::printf("trigram scorer fitted on %zu texts\n", data.size());
    } else if (*pre) {
      const auto cfg = config_or_default(pre_config);
      const auto rules = rules_for(cfg, pre_rules);
      const auto corpus = read_all(pre_corpus, cfg.mapping);
      const auto triples = extract_training_triples(corpus, rules);
      if (triples.empty()) throw std::runtime_error("corpus yields no (constituent, type, modifier) triples");
      auto opts = cfg.pretrain;
      if (pre_steps > 0) opts.steps = pre_steps;
      opts.on_step = [&](int step, const BatchLoss& l) {
        if (pre_log_every > 0 && (step % pre_log_every == 0 || step == opts.steps))
          std::printf("step %5d  L1 %.4f  L2 %.4f  kl %.4f  nll/token %.4f\n", step, l.l1, l.l2, l.kl, l.nll_per_token);
      };
      std::printf("%zu triples from %zu texts\n", triples.size(), corpus.size());
      const auto model = pretrain(triples, cfg.model, opts, rules);
      model.save(pre_out);
      std::printf("checkpoint written to %s\n", pre_out.c_str());
    } else if (*att) {
      const auto cfg = load_config(att_config);
      const auto rules = rules_for(cfg, att_rules);
      auto data = read_dataset(att_data, &cfg.mapping);
      if (att_limit >= 0 && static_cast<std::size_t>(att_limit) < data.size()) data.resize(static_cast<std::size_t>(att_limit));
      const auto model = GenerativeModel::load(att_ckpt);
      if (model.rules_hash() != rules.hash_hex())
        throw std::runtime_error("checkpoint was pretrained with different template rules (" + model.rules_hash() +
                                 " vs " + rules.hash_hex() + ")");

      std::unique_ptr<TargetModel> target;
      if (att_target.rfind("exec:", 0) == 0 || att_target.rfind("unix:", 0) == 0) {
        const auto labels = split_labels(att_labels);
        if (labels.empty()) throw std::runtime_error("external targets need --labels");
        target = std::make_unique<ExternalTarget>(att_target, labels);
      } else {
        target = load_classifier(att_target);
      }

      std::unique_ptr<PerplexityScorer> scorer;
      if (att_scorer.rfind("external:", 0) == 0) {
        scorer = std::make_unique<ExternalScorer>(att_scorer.substr(9));
      } else if (att_scorer.rfind("ngram:", 0) == 0) {
        scorer = std::make_unique<NgramScorer>(NgramScorer::load(att_scorer.substr(6)));
      } else if (!att_scorer.empty()) {
        throw std::runtime_error("--scorer expects ngram:<path> or external:<endpoint>");
      } else if (cfg.scorer_kind == "external") {
        if (!cfg.scorer_endpoint) throw std::runtime_error("[scorer] kind = external needs an endpoint");
        scorer = std::make_unique<ExternalScorer>(*cfg.scorer_endpoint);
      } else if (cfg.scorer_path) {
        scorer = std::make_unique<NgramScorer>(NgramScorer::load(*cfg.scorer_path));
      } else {
        log::warn("no scorer configured; fitting the trigram scorer on the attacked dataset");
        scorer = std::make_unique<NgramScorer>(NgramScorer::train(data));
      }

      RunOptions run;
      run.attack = cfg.attack;
      run.workers = att_workers >= 0 ? att_workers : cfg.workers;
      run.timing = cfg.timing;
      long done = 0;
      run.on_result = [&](const AttackResult&) {
        if (++done % 50 == 0) log::info("attacked " + std::to_string(done) + "/" + std::to_string(data.size()));
      };
      const HarnessInputs in{&model, target.get(), scorer.get(), &rules};
      const auto results = att_serial ? run_attacks_serial(data, in, run) : run_attacks(data, in, run);
      std::vector<nlohmann::json> recs;
      for (const auto& r : results) recs.push_back(r.to_json());
      write_jsonl(att_out, recs);
      const auto m = evaluate(results);
      std::printf("orig acc %.4f  adv acc %.4f  success %.4f  mean queries %.1f\n", m.orig_accuracy, m.adv_accuracy,
                  m.attack_success_rate, m.mean_queries);
    } else if (*ev) {
      write_json(ev_out, evaluate(read_results(ev_results)).to_json());
    } else if (*un) {
      const auto a = read_jsonl(un_a);
      const auto b = read_jsonl(un_b);
      write_json(un_out, union_success(a, b).to_json());
    } else if (*aug) {
      const auto rep = export_augmented(aug_train, read_results(aug_results), aug_out);
      std::printf("%ld original records, %ld adversarial records added, %ld skipped\n", rep.original, rep.added,
                  rep.skipped);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "advexp: %s\n", e.what());
    return 1;
  }
  return 0;
}
