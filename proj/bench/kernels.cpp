// Serial reference vs OpenMP kernels, plus the two sweep schemes.
// On a single-core machine the parallel variants only show their overhead.

#include <benchmark/benchmark.h>

#include "nhdp/emission.hpp"
#include "nhdp/eval.hpp"
#include "nhdp/gibbs_crf.hpp"
#include "nhdp/gibbs_direct.hpp"
#include "nhdp/oracle.hpp"
#include "nhdp/synth.hpp"

using namespace nhdp;

namespace {

SynthData data(std::size_t docs) {
  SynthConfig cfg;
  cfg.docs = docs;
  cfg.seed = 11;
  return synthesize(cfg);
}

// A trained-ish state: a few sweeps past initialization.
ModelState warm_state(const Corpus& c, int depth) {
  Rng rng(5);
  const auto labels = AuthorLabels::unlabeled(c.num_docs());
  ModelState s = new_state(c, labels, Hyper::with_depth(depth), rng);
  for (int i = 0; i < 20; ++i) sweep(s, labels, rng);
  return s;
}

void BM_Emission(benchmark::State& st, bool parallel) {
  const auto d = data(100);
  const ModelState s = warm_state(d.corpus, 2);
  for (auto _ : st) {
    auto t = parallel ? emission_table(s, 2) : emission_table_serial(s, 2);
    benchmark::DoNotOptimize(t);
  }
}
BENCHMARK_CAPTURE(BM_Emission, serial, false)->Unit(benchmark::kMicrosecond);
BENCHMARK_CAPTURE(BM_Emission, parallel, true)->Unit(benchmark::kMicrosecond);

void BM_Perplexity(benchmark::State& st, bool parallel) {
  const auto d = data(120);
  std::vector<std::size_t> train, test;
  for (std::size_t j = 0; j < d.corpus.num_docs(); ++j) (j % 6 == 0 ? test : train).push_back(j);
  const Corpus tr = d.corpus.subset(train);
  const Corpus te = d.corpus.subset(test);
  const std::vector<PosteriorSample> samples = {{warm_state(tr, 1), 20}};
  const auto labels = AuthorLabels::unlabeled(te.num_docs());
  for (auto _ : st) {
    auto r = parallel ? perplexity(samples, te, labels, 5, 1) : perplexity_serial(samples, te, labels, 5, 1);
    benchmark::DoNotOptimize(r);
  }
}
BENCHMARK_CAPTURE(BM_Perplexity, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Perplexity, parallel, true)->Unit(benchmark::kMillisecond);

void BM_Enumeration(benchmark::State& st, bool parallel) {
  Corpus c;
  c.docs = {{0, 1, 2}, {2, 3, 0}};
  c.vocab = {"a", "b", "c", "d"};
  const TruncSpec spec{Hyper::with_depth(1), {4, 4}, {}, false};
  for (auto _ : st) {
    auto p = parallel ? enumerate_posterior(c, spec) : enumerate_posterior_serial(c, spec);
    benchmark::DoNotOptimize(p);
  }
}
BENCHMARK_CAPTURE(BM_Enumeration, serial, false)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Enumeration, parallel, true)->Unit(benchmark::kMillisecond);

// Both schemes on the same pooled tokens, as in the bench verb.
void BM_SweepDirect(benchmark::State& st) {
  const Corpus c = data(static_cast<std::size_t>(st.range(0))).corpus.flattened();
  Rng rng(3);
  const auto labels = AuthorLabels::unlabeled(1);
  ModelState s = new_state(c, labels, Hyper::with_depth(1), rng);
  for (auto _ : st) sweep(s, labels, rng);
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * c.num_tokens()));
}
BENCHMARK(BM_SweepDirect)->Arg(25)->Arg(100)->Unit(benchmark::kMillisecond);

void BM_SweepTable(benchmark::State& st) {
  const Corpus c = data(static_cast<std::size_t>(st.range(0))).corpus;
  Rng rng(3);
  U2CrfState s = u2_crf_init(c, 1.0, 1.0, 1.0, 0.1, rng);
  for (auto _ : st) crf_sweep(s, rng);
  st.SetItemsProcessed(static_cast<std::int64_t>(st.iterations() * c.num_tokens()));
}
BENCHMARK(BM_SweepTable)->Arg(25)->Arg(100)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
