// Serial reference vs OpenMP kernels: CVAE batch gradients and the
// per-example attack fan-out.

#include <benchmark/benchmark.h>
#include <omp.h>

#include "advexp/classifiers.hpp"
#include "advexp/cvae.hpp"
#include "advexp/harness.hpp"
#include "advexp/scorer.hpp"
#include "advexp/toy.hpp"

using namespace advexp;

namespace {

struct Setup {
  toy::Datasets data;
  std::vector<TrainingTriple> triples;
  GenerativeModel model;
  BowClassifier target;
  NgramScorer lm;

  Setup()
      : data([] {
          toy::Options o;
          o.corpus = 800;
          o.pair_train = o.pair_test = 1;
          return toy::generate(o);
        }()),
        triples(extract_training_triples(data.corpus)),
        model(CvaeConfig{}, Vocabulary::build(triples, 2), "bench", 1),
        target(BowClassifier::train(data.sentiment_train, {})),
        lm(NgramScorer::train(data.corpus)) {}
};

const Setup& setup() {
  static const Setup s;
  return s;
}

void batch_gradients(benchmark::State& state, bool parallel) {
  const auto& s = setup();
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const std::vector<TrainingTriple> batch(s.triples.begin(), s.triples.begin() + static_cast<long>(n));
  std::mt19937_64 rng(1);
  std::vector<nn::Vector> eps;
  for (std::size_t i = 0; i < n; ++i) eps.push_back(nn::standard_normal(rng, s.model.config().latent));
  nn::Gradients g(s.model.params());
  for (auto _ : state) {
    const auto loss = parallel ? batch_gradients_parallel(s.model, batch, eps, g)
                               : batch_gradients_serial(s.model, batch, eps, g);
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long>(n));
  state.counters["threads"] = parallel ? omp_get_max_threads() : 1;
}

void run_attacks_bench(benchmark::State& state, bool parallel) {
  const auto& s = setup();
  const std::span<const LabeledText> data(s.data.sentiment_test.data(), static_cast<std::size_t>(state.range(0)));
  const HarnessInputs in{&s.model, &s.target, &s.lm, &RuleSet::default_rules()};
  RunOptions o;
  o.attack.search.steps = 10;
  for (auto _ : state) {
    auto r = parallel ? run_attacks(data, in, o) : run_attacks_serial(data, in, o);
    benchmark::DoNotOptimize(r);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
  state.counters["threads"] = parallel ? omp_get_max_threads() : 1;
}

}  // namespace

BENCHMARK_CAPTURE(batch_gradients, serial, false)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(batch_gradients, parallel, true)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(run_attacks_bench, serial, false)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(run_attacks_bench, parallel, true)->Arg(8)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
