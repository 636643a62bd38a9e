#include <benchmark/benchmark.h>

#include <cmath>
#include <string>
#include <vector>

#include "align/alignment.hpp"
#include "align/analysis.hpp"
#include "align/rng.hpp"
#include "align/service.hpp"
#include "align/stats.hpp"
#include "align/study.hpp"
#include "align/synth.hpp"

namespace {

using namespace align;

synth::PlantedCorpus corpus_of(int utterances, std::size_t dim) {
  synth::CorpusSpec spec;
  spec.seed = 11;
  spec.dim = dim;
  spec.shared_weight = std::sqrt(0.22);
  spec.n_children = 4;
  spec.sessions_per_child = 5;
  spec.utterances_per_session = utterances / 20;
  return synth::make_corpus(spec);
}

void BM_ScoreCorpus(benchmark::State& state) {
  const auto planted = corpus_of(static_cast<int>(state.range(0)), 512);
  const auto text = planted.text_store();
  const auto image = planted.image_store();
  const unsigned threads = static_cast<unsigned>(state.range(1));
  for (auto _ : state) {
    auto result = score_corpus(planted.corpus, {text, image}, AnalysisConfig{}, std::nullopt, threads);
    benchmark::DoNotOptimize(result.records.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScoreCorpus)->Args({2000, 1})->Args({10000, 1})->Args({10000, 4})->Unit(benchmark::kMillisecond);

stats::BinomialData binomial_rows(int n) {
  Rng rng(3);
  stats::DataTable t;
  std::vector<double> score(static_cast<std::size_t>(n)), condition(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    score[static_cast<std::size_t>(i)] = rng.uniform(0.05, 0.45);
    condition[static_cast<std::size_t>(i)] = i % 2;
  }
  t.add_column("score", score);
  t.add_column("condition", condition);
  const std::vector<std::string> terms{"score", "condition", "score:condition"};
  stats::BinomialData d;
  d.design = stats::build_design(t, terms);
  d.successes.resize(n);
  d.trials = Eigen::VectorXd::Constant(n, 6.0);
  for (int i = 0; i < n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(4.625 - 18.5 * score[static_cast<std::size_t>(i)]));
    int k = 0;
    for (int j = 0; j < 6; ++j) k += rng.bernoulli(p);
    d.successes[i] = k;
  }
  return d;
}

void BM_FitLogistic(benchmark::State& state) {
  const auto data = binomial_rows(static_cast<int>(state.range(0)));
  for (auto _ : state) {
    auto fit = stats::fit_logistic(data);
    benchmark::DoNotOptimize(fit.deviance);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_FitLogistic)->Arg(1464)->Arg(100000)->Unit(benchmark::kMillisecond);

void BM_ClusterBootstrap(benchmark::State& state) {
  const auto planted = corpus_of(10000, 16);
  const auto text = planted.text_store();
  const auto image = planted.image_store();
  const auto scored = score_corpus(planted.corpus, {text, image}, AnalysisConfig{});
  const auto rows = analysis::duration_rows(planted.corpus, scored.records);
  const int replicates = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto fit = analysis::fit_clustered(rows, replicates, 5);
    benchmark::DoNotOptimize(fit.cluster_bootstrap_ci95.data());
  }
  state.SetItemsProcessed(state.iterations() * replicates);
}
BENCHMARK(BM_ClusterBootstrap)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_StratifiedSample(benchmark::State& state) {
  const auto planted = corpus_of(10000, 16);
  const auto text = planted.text_store();
  const auto image = planted.image_store();
  const auto scored = score_corpus(planted.corpus, {text, image}, AnalysisConfig{});
  for (auto _ : state) {
    auto report = stratified_sample(scored.records, planted.corpus, SamplerConfig{});
    benchmark::DoNotOptimize(report.pairs.data());
  }
}
BENCHMARK(BM_StratifiedSample)->Unit(benchmark::kMillisecond);

// One annotator session end to end through the in-process state machine
// (no HTTP, no log files).
void BM_ServiceSession(benchmark::State& state) {
  std::vector<SampledPair> pairs;
  std::vector<AlignmentRecord> records;
  for (int i = 0; i < 732; ++i) {
    pairs.push_back({"u" + std::to_string(i), "f" + std::to_string(i), 0, 0.1 + 0.0004 * i, false});
  }
  auto trials = generate_trials(pairs, Condition::Image, 1);
  const auto assignment = assign_trials(trials, 80, StudyConfig{}, 2);
  for (auto _ : state) {
    state.PauseTiming();
    service::StudyService svc(service::StudyData::from(trials, assignment), std::nullopt);
    state.ResumeTiming();
    for (int a = 0; a < 80; ++a) {
      const std::string id = "a" + std::to_string(a);
      svc.open_session(id);
      for (int n = 0;; ++n) {
        const auto next = svc.next_trial(id);
        if (next.status != 200) break;
        svc.submit({id, next.body["trial_id"].get<std::string>(), 0, std::nullopt, id + "/" + std::to_string(n)});
      }
    }
  }
}
BENCHMARK(BM_ServiceSession)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
