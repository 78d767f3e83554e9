#include <benchmark/benchmark.h>

#include "webrpg/rng.hpp"
#include "webrpg/rp_codec.hpp"

using namespace webrpg;

namespace {

PageRps make_page(int elements, uint64_t seed) {
  Rng rng(seed);
  const auto& vocab = Vocabulary::standard();
  PageRps page;
  for (int i = 1; i <= elements; ++i) {
    RpVector v;
    for (RpName p : all_params()) {
      const auto& legal = vocab.legal_tokens(p);
      v[p] = legal[static_cast<size_t>(
          rng.uniform_int(0, static_cast<int>(legal.size()) - 1))];
    }
    page[i] = v;
  }
  return page;
}

}  // namespace

static void BM_EmitCss(benchmark::State& state) {
  const PageRps page = make_page(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(emit_css(page));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EmitCss)->Arg(32)->Arg(128);

static void BM_ParseCss(benchmark::State& state) {
  const std::string css = emit_css(make_page(static_cast<int>(state.range(0)), 2));
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_css_rules(css));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ParseCss)->Arg(32)->Arg(128);

static void BM_JsonRoundTrip(benchmark::State& state) {
  const PageRps page = make_page(static_cast<int>(state.range(0)), 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(from_json(to_json(page)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_JsonRoundTrip)->Arg(32)->Arg(128);

BENCHMARK_MAIN();
