#include <benchmark/benchmark.h>

#include "webrpg/eval.hpp"
#include "webrpg/harness.hpp"
#include "webrpg/vc_metric.hpp"

using namespace webrpg;

namespace {

Page make_page(int elements, uint64_t seed) {
  SynthSpec spec;
  spec.seed = 7000 + seed;
  spec.min_elements = elements;
  spec.max_elements = elements;
  return synth_page(spec, seed);
}

}  // namespace

static void BM_EleIou(benchmark::State& state) {
  const Page page = make_page(static_cast<int>(state.range(0)), 1);
  const PageRps& real = *page.rps;
  const PageRps noisy = perturb_values(real, 0.5, 42);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ele_iou(real, noisy));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EleIou)->Arg(32)->Arg(128);

static void BM_ScScore(benchmark::State& state) {
  const Page page = make_page(static_cast<int>(state.range(0)), 2);
  const PageRps& real = *page.rps;
  const PageRps noisy = substitute_elements(real, 1.0, 43);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sc_score(real, noisy));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ScScore)->Arg(32)->Arg(128);

static void BM_VcTotal(benchmark::State& state) {
  const Page page = make_page(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vc_total(page));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_VcTotal)->Arg(32)->Arg(128);

static void BM_SynthPage(benchmark::State& state) {
  SynthSpec spec;
  spec.min_elements = static_cast<int>(state.range(0));
  spec.max_elements = static_cast<int>(state.range(0));
  uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(synth_page(spec, seed++));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_SynthPage)->Arg(32)->Arg(128);

BENCHMARK_MAIN();
