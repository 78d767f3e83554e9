#include "webrpg/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <numeric>
#include <set>

#include "webrpg/dom.hpp"
#include "webrpg/errors.hpp"
#include "webrpg/io.hpp"
#include "webrpg/nn/checkpoint.hpp"
#include "webrpg/rng.hpp"
#include "webrpg/rp_codec.hpp"
#include "webrpg/vc_metric.hpp"

namespace webrpg {

namespace {

constexpr int kCanvas = 1920;

void validate_spec(const SynthSpec& spec) {
  if (spec.min_elements < 8 || spec.max_elements > 128 ||
      spec.min_elements > spec.max_elements) {
    throw BadSpecError("synth: element range must sit inside [8, 128]");
  }
  if (spec.grid_cols < 4 || spec.grid_cols > 32 ||
      spec.grid_cols % 4 != 0 || kCanvas % spec.grid_cols != 0) {
    throw BadSpecError("synth: grid_cols must divide 1920 and be a multiple of 4");
  }
  if (spec.style_groups < 1 || spec.style_groups > 16) {
    throw BadSpecError("synth: style_groups must be in [1, 16]");
  }
  if (spec.palette_colors < 2 || spec.palette_colors > kColorCount) {
    throw BadSpecError("synth: palette_colors must be in [2, 46]");
  }
  if (!(spec.mean_chars >= 1.0)) {
    throw BadSpecError("synth: mean_chars must be at least 1");
  }
}

const std::vector<std::string>& lexicon() {
  static const std::vector<std::string> words = {
      "account", "balance", "browse",  "cart",    "checkout", "details",
      "explore", "featured", "invoice", "items",   "latest",   "learn",
      "member",  "offers",   "orders",  "payment", "popular",  "profile",
      "returns", "reviews",  "savings", "search",  "support",  "updates"};
  return words;
}

std::string make_text(Rng& rng, double mean_chars) {
  const auto& words = lexicon();
  const int target = static_cast<int>(
      rng.uniform_int(1, std::max<int64_t>(1, std::llround(2.0 * mean_chars))));
  std::string out;
  while (static_cast<int>(out.size()) < target) {
    if (!out.empty()) {
      out += ' ';
    }
    out += words[static_cast<size_t>(
        rng.uniform_int(0, static_cast<int64_t>(words.size()) - 1))];
  }
  return out;
}

// One shared 9-token style per group; distinct font sizes keep the groups
// distinct even when the palette collides.
std::vector<RpVector> make_group_styles(const SynthSpec& spec, Rng& rng) {
  std::vector<RpTokenId> palette(static_cast<size_t>(kColorCount));
  std::iota(palette.begin(), palette.end(), RpTokenId{1921});
  rng.shuffle(palette);
  palette.resize(static_cast<size_t>(spec.palette_colors));

  std::vector<RpVector> styles;
  for (int g = 0; g < spec.style_groups; ++g) {
    RpVector v;
    v[RpName::kFontStyle] = static_cast<RpTokenId>(1967 + g % 3);
    v[RpName::kFontWeight] = static_cast<RpTokenId>(1970 + g % 9);
    v[RpName::kFontSize] = static_cast<RpTokenId>(10 + g);
    v[RpName::kLineHeight] =
        g % 4 == 0 ? RpTokenId{1979} : static_cast<RpTokenId>(18 + g);
    v[RpName::kTextAlign] = static_cast<RpTokenId>(1980 + g % 6);
    v[RpName::kTextDecoration] = static_cast<RpTokenId>(1986 + g % 2);
    v[RpName::kTextTransform] = static_cast<RpTokenId>(1988 + g % 4);
    v[RpName::kColor] = palette[static_cast<size_t>(g % spec.palette_colors)];
    v[RpName::kBackgroundColor] =
        palette[static_cast<size_t>((g + 3) % spec.palette_colors)];
    styles.push_back(v);
  }
  return styles;
}

enum Role {
  kRoleRoot = 0,
  kRoleHeader,
  kRoleNav,
  kRoleLink,
  kRoleCard,
  kRoleTitle,
  kRoleBody,
  kRoleButton
};

}  // namespace

Page synth_page(const SynthSpec& spec, uint64_t seed) {
  validate_spec(spec);
  Rng rng(spec.seed + seed);

  const int cell = kCanvas / spec.grid_cols;
  const int n = static_cast<int>(
      rng.uniform_int(spec.min_elements, spec.max_elements));
  const int cards = std::min((n - 4) / 4, 31);
  const int links = n - 3 - 4 * cards;  // 1..4 by construction

  const auto styles = make_group_styles(spec, rng);
  std::vector<RpVector> rps;  // pre-order, zipped with ids after build_page
  const auto styled = [&](Role role, int left, int top, int width,
                          int height) {
    RpVector v = styles[static_cast<size_t>(role % spec.style_groups)];
    v[RpName::kLeft] = static_cast<RpTokenId>(left);
    v[RpName::kTop] = static_cast<RpTokenId>(top);
    v[RpName::kWidth] = static_cast<RpTokenId>(width);
    v[RpName::kHeight] = static_cast<RpTokenId>(height);
    rps.push_back(v);
  };

  const int rows = (cards + 3) / 4;  // four cards per row
  const int span = spec.grid_cols / 4;
  const int card_w = span * cell - 20;

  DomNode root;
  root.tag = "div";
  styled(kRoleRoot, 0, 0, kCanvas, std::min(kCanvas, 120 + rows * 220));

  DomNode header;
  header.tag = "h1";
  header.add_text("Section " + std::to_string(seed));
  styled(kRoleHeader, 0, 0, kCanvas, 56);
  root.add_child(std::move(header));

  DomNode nav;
  nav.tag = "div";
  styled(kRoleNav, 0, 64, kCanvas, 40);
  for (int i = 0; i < links; ++i) {
    DomNode link;
    link.tag = "a";
    link.add_text(make_text(rng, spec.mean_chars / 2.0));
    styled(kRoleLink, i * 2 * cell, 68, 2 * cell - 20, 32);
    nav.add_child(std::move(link));
  }
  root.add_child(std::move(nav));

  for (int i = 0; i < cards; ++i) {
    const int left = (i % 4) * span * cell;
    const int top = 120 + (i / 4) * 220;
    DomNode card;
    card.tag = "div";
    styled(kRoleCard, left, top, card_w, 180);

    DomNode title;
    title.tag = "h2";
    title.add_text(make_text(rng, spec.mean_chars));
    styled(kRoleTitle, left + 10, top + 10, card_w - 40, 28);
    card.add_child(std::move(title));

    DomNode body;
    body.tag = "p";
    body.add_text(make_text(rng, 2.0 * spec.mean_chars));
    styled(kRoleBody, left + 10, top + 48, card_w - 40, 80);
    card.add_child(std::move(body));

    DomNode button;
    button.tag = "a";
    button.add_text(make_text(rng, spec.mean_chars / 2.0));
    styled(kRoleButton, left + 10, top + 140, 120, 30);
    card.add_child(std::move(button));

    root.add_child(std::move(card));
  }

  Page page = build_page(root);
  PageRps assigned;
  for (size_t i = 0; i < rps.size(); ++i) {
    assigned[static_cast<int>(i) + 1] = rps[i];
  }
  page.rps = std::move(assigned);
  return normalize_layout(page);
}

// ---------------------------------------------------------------- dataset --

std::string manifest_to_json(const DatasetManifest& manifest) {
  nlohmann::ordered_json j;
  j["vocabulary_version"] = manifest.vocabulary_version;
  j["vc_threshold"] = manifest.vc_threshold;
  j["split_ratio"] = manifest.split_ratio;
  j["seed"] = manifest.seed;
  j["samples"] = nlohmann::ordered_json::array();
  for (const auto& s : manifest.samples) {
    nlohmann::ordered_json e;
    e["page"] = s.page_json;
    e["rps"] = s.rps_json;
    e["html"] = s.html;
    e["split"] = s.split;
    e["vc"] = s.vc;
    j["samples"].push_back(std::move(e));
  }
  return j.dump(2);
}

DatasetManifest manifest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  DatasetManifest m;
  try {
    m.vocabulary_version = j.at("vocabulary_version").get<std::string>();
    m.vc_threshold = j.at("vc_threshold").get<double>();
    m.split_ratio = j.at("split_ratio").get<double>();
    m.seed = j.at("seed").get<uint64_t>();
    for (const auto& e : j.at("samples")) {
      ManifestEntry s;
      s.page_json = e.at("page").get<std::string>();
      s.rps_json = e.at("rps").get<std::string>();
      s.html = e.at("html").get<std::string>();
      s.split = e.at("split").get<std::string>();
      s.vc = e.at("vc").get<double>();
      m.samples.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("manifest: ") + e.what());
  }
  return m;
}

namespace {

struct Scored {
  Page page;
  double vc = 0.0;
};

DatasetManifest write_dataset(std::vector<Scored> kept,
                              const std::string& out_dir, double vc_threshold,
                              double split, uint64_t seed) {
  if (split < 0.0 || split > 1.0) {
    throw BadSpecError("dataset: split must lie in [0, 1]");
  }
  if (kept.empty()) {
    throw EmptyAfterFilterError(
        "dataset: no page passed the complexity filter");
  }
  std::filesystem::create_directories(out_dir);

  std::vector<size_t> order(kept.size());
  std::iota(order.begin(), order.end(), size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  const size_t n_train = std::min(
      kept.size(),
      static_cast<size_t>(std::floor(split * static_cast<double>(kept.size()) +
                                     1e-9)));
  std::set<size_t> train_set(order.begin(),
                             order.begin() + static_cast<long>(n_train));

  DatasetManifest manifest;
  manifest.vc_threshold = vc_threshold;
  manifest.split_ratio = split;
  manifest.seed = seed;
  for (size_t i = 0; i < kept.size(); ++i) {
    char stem[16];
    std::snprintf(stem, sizeof stem, "%03zu", i);
    ManifestEntry entry;
    entry.page_json = std::string(stem) + ".page.json";
    entry.rps_json = std::string(stem) + ".rps.json";
    entry.html = std::string(stem) + ".html";
    entry.split = train_set.count(i) ? "train" : "test";
    entry.vc = kept[i].vc;

    const auto base = std::filesystem::path(out_dir);
    write_text_file((base / entry.html).string(), kept[i].page.source_html);
    write_text_file((base / entry.page_json).string(),
                    page_to_json(kept[i].page));
    write_text_file((base / entry.rps_json).string(),
                    to_json(*kept[i].page.rps));
    manifest.samples.push_back(std::move(entry));
  }
  write_text_file((std::filesystem::path(out_dir) / "manifest.json").string(),
                  manifest_to_json(manifest));
  return manifest;
}

}  // namespace

DatasetManifest build_dataset(const SynthSpec& spec, int count,
                              const std::string& out_dir, double vc_threshold,
                              double split, uint64_t seed) {
  if (count <= 0) {
    throw BadSpecError("dataset: count must be positive");
  }
  std::vector<Scored> kept;
  for (int i = 0; i < count; ++i) {
    Page page = synth_page(spec, static_cast<uint64_t>(i));
    const VcReport report = vc_total(page);
    if (passes_filter(report, vc_threshold)) {
      kept.push_back({std::move(page), report.vc_total});
    }
  }
  return write_dataset(std::move(kept), out_dir, vc_threshold, split, seed);
}

DatasetManifest build_dataset(
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const std::string& out_dir, double vc_threshold, double split,
    uint64_t seed) {
  if (pairs.empty()) {
    throw BadSpecError("dataset: no input pairs");
  }
  std::vector<Scored> kept;
  for (const auto& [html_path, rps_path] : pairs) {
    const PageRps source_rps = from_json(read_text_file(rps_path));
    DomNode root = parse_html(read_text_file(html_path));
    drop_invisible(root);
    for (Page& sub : extract_subpages(root, 32, 128, &source_rps)) {
      try {
        Page cleaned = normalize_layout(clean_subpage(sub));
        const VcReport report = vc_total(cleaned);
        if (passes_filter(report, vc_threshold)) {
          kept.push_back({std::move(cleaned), report.vc_total});
        }
      } catch (const Error&) {
        // Sub-pages with missing boxes or styles cannot be scored; skip.
      }
    }
  }
  return write_dataset(std::move(kept), out_dir, vc_threshold, split, seed);
}

std::vector<Page> load_split(const std::string& manifest_path,
                             const std::string& split) {
  const auto manifest = manifest_from_json(read_text_file(manifest_path));
  const auto dir = std::filesystem::path(manifest_path).parent_path();
  std::vector<Page> pages;
  for (const auto& sample : manifest.samples) {
    if (!split.empty() && sample.split != split) {
      continue;
    }
    Page page = page_from_json(read_text_file((dir / sample.page_json).string()));
    page.source_html = read_text_file((dir / sample.html).string());
    pages.push_back(std::move(page));
  }
  return pages;
}

// --------------------------------------------------------------- embedder --

void save_embedder(const std::string& path, const HtmlEmbedder& embedder) {
  nlohmann::json cfg;
  cfg["model"] = "embedder";
  cfg["d"] = embedder.config().d;
  cfg["d_sem"] = embedder.config().d_sem;
  cfg["max_depth"] = embedder.config().max_depth;
  cfg["max_subscript"] = embedder.config().max_subscript;
  cfg["tag_vocab"] = embedder.config().tag_vocab;
  nn::save_checkpoint(path, embedder.params().all(), cfg.dump());
}

HtmlEmbedder load_embedder(const std::string& path) {
  const auto ckpt = nn::load_checkpoint(path);
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(ckpt.config_json);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("embedder: bad config sidecar: ") +
                          e.what());
  }
  if (!cfg.contains("model") || cfg["model"] != "embedder") {
    throw CheckpointError("embedder: checkpoint is not an embedder");
  }
  EmbedderConfig config;
  config.d = cfg.at("d").get<int>();
  config.d_sem = cfg.at("d_sem").get<int>();
  config.max_depth = cfg.at("max_depth").get<int>();
  config.max_subscript = cfg.at("max_subscript").get<int>();
  config.tag_vocab = cfg.at("tag_vocab").get<std::vector<std::string>>();
  Rng init(0);
  HtmlEmbedder embedder(config, init);
  nn::restore_params(ckpt, embedder.params().all());
  return embedder;
}

std::string cache_dir() {
  if (const char* env = std::getenv("WEBRPG_CACHE_DIR")) {
    if (*env != '\0') {
      return env;
    }
  }
  return ".webrpg";
}

}  // namespace webrpg
