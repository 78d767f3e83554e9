#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "webrpg/embedding.hpp"
#include "webrpg/page.hpp"

namespace webrpg {

// Knobs of the synthetic corpus generator. Pages come out as a header / nav
// / card-grid skeleton whose layout snaps to a column grid and whose styles
// are shared across role groups — the regularities the metrics probe.
struct SynthSpec {
  uint64_t seed = 0;         // corpus identity; page i draws from seed + i
  int min_elements = 32;     // element count range per page (the default
  int max_elements = 128;    //   mirrors the sub-page window)
  int grid_cols = 12;        // 1920 must divide evenly; multiples of 4
  int style_groups = 4;      // distinct 9-token style vectors per page
  int palette_colors = 6;    // palette subset drawn per page, >= 2
  double mean_chars = 12.0;  // rough mean of element text lengths
};

// One synthetic sample: DOM, serialized HTML with ele{N} markers, and valid
// top-left-normalized rendering parameters for every element. Elements in
// the same style group share all 9 style tokens, so the partition has at
// most spec.style_groups subsets. BadSpecError on out-of-range knobs.
Page synth_page(const SynthSpec& spec, uint64_t seed);

struct ManifestEntry {
  std::string page_json;  // paths relative to the manifest file
  std::string rps_json;
  std::string html;
  std::string split;  // "train" | "test"
  double vc = 0.0;    // total visual complexity at build time
};

struct DatasetManifest {
  std::string vocabulary_version = "rp-1993";
  double vc_threshold = 0.1;
  double split_ratio = 0.8;
  uint64_t seed = 0;
  std::vector<ManifestEntry> samples;
};

std::string manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const std::string& text);

// Synthesizes `count` pages, drops those under the complexity threshold,
// splits the survivors train/test with a seeded shuffle, and writes
// NNN.html + NNN.page.json + NNN.rps.json plus manifest.json into out_dir.
// EmptyAfterFilterError when nothing survives. Re-running with the same
// arguments reproduces every file byte for byte.
DatasetManifest build_dataset(const SynthSpec& spec, int count,
                              const std::string& out_dir,
                              double vc_threshold = 0.1, double split = 0.8,
                              uint64_t seed = 0);

// Ingest variant: (HTML path, RP-JSON path) pairs. Each file is parsed,
// stripped of invisible/disallowed nodes, cut into sub-pages, and
// normalized; sub-pages with incomplete parameters are skipped. The same
// filter/split/write step follows.
DatasetManifest build_dataset(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::string& out_dir, double vc_threshold = 0.1, double split = 0.8,
    uint64_t seed = 0);

// Reads the samples of one split back ("train", "test", or "" for all),
// in manifest order. Paths resolve relative to the manifest.
std::vector<Page> load_split(const std::string& manifest_path,
                             const std::string& split);

// The generators condition on the embedder's output, so their checkpoints
// are only meaningful next to the embedder trained with them.
void save_embedder(const std::string& path, const HtmlEmbedder& embedder);
HtmlEmbedder load_embedder(const std::string& path);

// Default home of model checkpoints: $WEBRPG_CACHE_DIR, else ".webrpg".
std::string cache_dir();

}  // namespace webrpg
