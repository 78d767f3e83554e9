#include <algorithm>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "commands.hpp"
#include "webrpg/errors.hpp"
#include "webrpg/harness.hpp"

namespace webrpg::cli {

namespace {

void report_build(const char* name, const DatasetManifest& m,
                  const std::string& out_dir) {
  size_t train = 0;
  for (const auto& s : m.samples) {
    train += s.split == "train" ? 1 : 0;
  }
  std::cerr << name << ": " << m.samples.size() << " sample(s), " << train
            << " train / " << m.samples.size() - train << " test -> "
            << out_dir << "/manifest.json\n";
}

struct SynthOpts {
  std::string out_dir;
  int count = 100;
  SynthSpec spec;
  double threshold = 0.1;
  double split = 0.8;
};

void run_synth(const SynthOpts& o) {
  std::cerr << "synth: count " << o.count << ", seed " << o.spec.seed
            << ", elements [" << o.spec.min_elements << ", "
            << o.spec.max_elements << "], " << o.spec.style_groups
            << " style group(s), threshold " << o.threshold << ", split "
            << o.split << "\n";
  const auto manifest = build_dataset(o.spec, o.count, o.out_dir, o.threshold,
                                      o.split, o.spec.seed);
  report_build("synth", manifest, o.out_dir);
}

struct IngestOpts {
  std::string in_dir;
  std::string out_dir;
  double threshold = 0.1;
  double split = 0.8;
  uint64_t seed = 0;
};

void run_ingest(const IngestOpts& o) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::vector<std::filesystem::path> htmls;
  for (const auto& entry : std::filesystem::directory_iterator(o.in_dir)) {
    if (entry.path().extension() == ".html") {
      htmls.push_back(entry.path());
    }
  }
  std::sort(htmls.begin(), htmls.end());  // directory order is not stable
  for (const auto& html : htmls) {
    std::filesystem::path rps = html;
    rps.replace_extension(".rps.json");
    if (std::filesystem::exists(rps)) {
      pairs.emplace_back(html.string(), rps.string());
    } else {
      std::cerr << "ingest: skipping " << html.string()
                << " (no matching .rps.json)\n";
    }
  }
  if (pairs.empty()) {
    throw BadSpecError("ingest: no (html, rps.json) pairs under " + o.in_dir);
  }
  std::cerr << "ingest: " << pairs.size() << " pair(s), threshold "
            << o.threshold << ", split " << o.split << ", seed " << o.seed
            << "\n";
  const auto manifest =
      build_dataset(pairs, o.out_dir, o.threshold, o.split, o.seed);
  report_build("ingest", manifest, o.out_dir);
}

}  // namespace

void register_synth(CLI::App& app) {
  auto opts = std::make_shared<SynthOpts>();
  CLI::App* cmd = app.add_subcommand(
      "synth", "generate a synthetic dataset with manifest and split");
  cmd->add_option("--out", opts->out_dir, "output dataset directory")
      ->required();
  cmd->add_option("--count", opts->count, "pages to synthesize")
      ->capture_default_str();
  cmd->add_option("--seed", opts->spec.seed, "corpus seed")
      ->capture_default_str();
  cmd->add_option("--min-elements", opts->spec.min_elements,
                  "per-page element minimum")
      ->capture_default_str();
  cmd->add_option("--max-elements", opts->spec.max_elements,
                  "per-page element maximum")
      ->capture_default_str();
  cmd->add_option("--grid-cols", opts->spec.grid_cols, "layout grid columns")
      ->capture_default_str();
  cmd->add_option("--style-groups", opts->spec.style_groups,
                  "distinct style vectors per page")
      ->capture_default_str();
  cmd->add_option("--palette", opts->spec.palette_colors,
                  "palette subset size")
      ->capture_default_str();
  cmd->add_option("--mean-chars", opts->spec.mean_chars,
                  "mean element text length")
      ->capture_default_str();
  cmd->add_option("--threshold", opts->threshold,
                  "visual-complexity filter threshold")
      ->capture_default_str();
  cmd->add_option("--split", opts->split, "train fraction")
      ->capture_default_str();
  cmd->callback([opts] { run_synth(*opts); });
}

void register_ingest(CLI::App& app) {
  auto opts = std::make_shared<IngestOpts>();
  CLI::App* cmd = app.add_subcommand(
      "ingest",
      "build a dataset from a directory of (page.html, page.rps.json) pairs");
  cmd->add_option("--in", opts->in_dir, "directory with html + rps.json pairs")
      ->required();
  cmd->add_option("--out", opts->out_dir, "output dataset directory")
      ->required();
  cmd->add_option("--threshold", opts->threshold,
                  "visual-complexity filter threshold")
      ->capture_default_str();
  cmd->add_option("--split", opts->split, "train fraction")
      ->capture_default_str();
  cmd->add_option("--seed", opts->seed, "split shuffle seed")
      ->capture_default_str();
  cmd->callback([opts] { run_ingest(*opts); });
}

}  // namespace webrpg::cli
