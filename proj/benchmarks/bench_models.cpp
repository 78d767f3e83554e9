#include <benchmark/benchmark.h>

#include <vector>

#include "webrpg/embedding.hpp"
#include "webrpg/harness.hpp"
#include "webrpg/rng.hpp"
#include "webrpg/vae.hpp"

using namespace webrpg;

namespace {

// Desk-scale widths: wide enough to exercise the GEMM path, small enough
// for a benchmark to iterate.
VaeConfig bench_vae_config() {
  VaeConfig cfg;
  cfg.latent_dim = 32;
  cfg.enc_hidden = {128, 96, 64, 48};
  cfg.dec_hidden = {48, 64, 96, 128};
  return cfg;
}

std::vector<RpVector> make_batch(int elements, uint64_t seed) {
  SynthSpec spec;
  spec.seed = 8000 + seed;
  spec.min_elements = elements;
  spec.max_elements = elements;
  const Page page = synth_page(spec, seed);
  std::vector<RpVector> out;
  for (const auto& [id, v] : *page.rps) {
    out.push_back(v);
  }
  return out;
}

}  // namespace

static void BM_VaeEncodeMean(benchmark::State& state) {
  Rng rng(1);
  Vae vae(bench_vae_config(), rng);
  const auto batch = make_batch(static_cast<int>(state.range(0)), 1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vae.encode_mean(batch));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_VaeEncodeMean)->Arg(32)->Arg(128);

static void BM_VaeRoundTrip(benchmark::State& state) {
  Rng rng(2);
  Vae vae(bench_vae_config(), rng);
  const auto batch = make_batch(static_cast<int>(state.range(0)), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(vae.decode_argmax(vae.encode_mean(batch)));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_VaeRoundTrip)->Arg(32)->Arg(128);

static void BM_HtmlEmbed(benchmark::State& state) {
  SynthSpec spec;
  spec.seed = 8100;
  spec.min_elements = static_cast<int>(state.range(0));
  spec.max_elements = static_cast<int>(state.range(0));
  const Page page = synth_page(spec, 0);

  EmbedderConfig cfg;
  cfg.d = 32;
  cfg.d_sem = 32;
  Rng rng(3);
  HtmlEmbedder embedder(cfg, rng);
  HashedBagEncoder enc(cfg.d_sem);
  for (auto _ : state) {
    benchmark::DoNotOptimize(embedder.embed(page, enc, "bench"));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_HtmlEmbed)->Arg(32)->Arg(128);

BENCHMARK_MAIN();
