#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"

#include "commands.hpp"
#include "webrpg/errors.hpp"
#include "webrpg/eval.hpp"
#include "webrpg/harness.hpp"
#include "webrpg/io.hpp"
#include "webrpg/page.hpp"
#include "webrpg/rng.hpp"
#include "webrpg/rp_codec.hpp"
#include "webrpg/vae.hpp"

namespace webrpg::cli {

namespace {

struct EvalOpts {
  std::string real_dir;
  std::string gen_dir;
  std::string metrics = "iou,sc";
  std::string out_path;
  std::string vae_path;
  std::string emb_path;
  uint64_t seed = 0;
  int fid_steps = 200;
  int fid_batch = 8;
};

struct PagePair {
  std::string stem;
  Page real_page;  // elements + real rps
  PageRps gen_rps;
};

std::vector<PagePair> pair_directories(const EvalOpts& o, bool need_pages) {
  std::vector<std::string> stems;
  for (const auto& entry : std::filesystem::directory_iterator(o.real_dir)) {
    const std::string name = entry.path().filename().string();
    const std::string suffix = ".rps.json";
    if (name.size() > suffix.size() &&
        name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0) {
      stems.push_back(name.substr(0, name.size() - suffix.size()));
    }
  }
  std::sort(stems.begin(), stems.end());
  if (stems.empty()) {
    throw BadSpecError("eval: no .rps.json files under " + o.real_dir);
  }

  std::vector<PagePair> pairs;
  for (const std::string& stem : stems) {
    PagePair pair;
    pair.stem = stem;
    const auto real = std::filesystem::path(o.real_dir);
    const auto gen = std::filesystem::path(o.gen_dir);
    const auto gen_rps = gen / (stem + ".rps.json");
    if (!std::filesystem::exists(gen_rps)) {
      throw BadSpecError("eval: " + o.gen_dir + " lacks " + stem +
                         ".rps.json");
    }
    pair.gen_rps = from_json(read_text_file(gen_rps.string()));
    if (need_pages) {
      pair.real_page = page_from_json(
          read_text_file((real / (stem + ".page.json")).string()));
      if (!pair.real_page.rps) {
        throw MissingStyleError("eval: " + stem +
                                ".page.json has no parameters");
      }
    } else {
      PageRps rps = from_json(
          read_text_file((real / (stem + ".rps.json")).string()));
      pair.real_page.rps = std::move(rps);
    }
    pairs.push_back(std::move(pair));
  }
  return pairs;
}

// Composite pollution: jitter, substitution, then swaps, with a per-page
// intensity draw — the negative class the classifier learns to reject.
PageRps pollute(const PageRps& rps, uint64_t seed) {
  Rng rng(seed);
  const double intensity = 0.5 + rng.uniform();
  PageRps out = perturb_values(rps, intensity, seed * 3 + 1);
  out = substitute_elements(out, intensity, seed * 3 + 2);
  return swap_elements(out, intensity, seed * 3 + 3);
}

double fid_for_variant(const std::vector<PagePair>& pairs,
                       FidClassifierConfig::Variant variant,
                       const Vae& vae, const HtmlEmbedder& embedder,
                       const EvalOpts& o, const char* label) {
  const HashedBagEncoder encoder(embedder.config().d_sem);

  // Element embeddings come from the page structure both sides share.
  std::vector<nn::TensorPtr> hs;
  for (const auto& p : pairs) {
    hs.push_back(embedder.embed(p.real_page, encoder, p.stem));
  }

  FidClassifierConfig cfg;
  cfg.d = vae.config().latent_dim;
  cfg.variant = variant;
  Rng init(o.seed + 11);
  FidClassifier clf(cfg, init);

  std::vector<FidClassifier::Example> examples;
  for (size_t i = 0; i < pairs.size(); ++i) {
    std::vector<RpVector> real_rps, fake_rps;
    const PageRps polluted =
        pollute(*pairs[i].real_page.rps, o.seed * 1000 + i);
    for (const auto& [id, v] : *pairs[i].real_page.rps) {
      real_rps.push_back(v);
    }
    for (const auto& [id, v] : polluted) {
      fake_rps.push_back(v);
    }
    examples.push_back({hs[i], real_rps, 1});
    examples.push_back({hs[i], fake_rps, 0});
  }

  nn::OptimizerConfig opt_cfg;
  opt_cfg.lr = 1e-3;
  nn::AdamW opt(clf.params().all(), opt_cfg);
  Rng order_rng(o.seed + 12);
  std::vector<size_t> order(examples.size());
  for (size_t i = 0; i < order.size(); ++i) {
    order[i] = i;
  }
  size_t cursor = examples.size();
  for (int step = 0; step < o.fid_steps; ++step) {
    std::vector<FidClassifier::Example> batch;
    for (int b = 0; b < o.fid_batch; ++b) {
      if (cursor == order.size()) {
        order_rng.shuffle(order);
        cursor = 0;
      }
      batch.push_back(examples[order[cursor++]]);
    }
    clf.train_step(batch, vae, opt);
  }
  std::cerr << "eval: " << label << " classifier accuracy "
            << clf.accuracy(examples, vae) << "\n";

  std::vector<std::vector<double>> real_feats, gen_feats;
  for (size_t i = 0; i < pairs.size(); ++i) {
    std::vector<RpVector> real_rps, gen_rps;
    for (const auto& [id, v] : *pairs[i].real_page.rps) {
      real_rps.push_back(v);
    }
    for (const auto& [id, v] : pairs[i].gen_rps) {
      gen_rps.push_back(v);
    }
    real_feats.push_back(clf.features(hs[i], real_rps, vae));
    gen_feats.push_back(clf.features(hs[i], gen_rps, vae));
  }
  return fid(real_feats, gen_feats);
}

void run(const EvalOpts& o) {
  std::vector<std::string> wanted;
  {
    std::string token;
    for (const char c : o.metrics + ",") {
      if (c == ',') {
        if (!token.empty()) {
          wanted.push_back(token);
          token.clear();
        }
      } else {
        token += c;
      }
    }
  }
  const std::set<std::string> known = {"iou", "sc", "fid", "fid-layout",
                                       "fid-style"};
  bool any_fid = false;
  for (const auto& m : wanted) {
    if (!known.count(m)) {
      throw BadSpecError("eval: unknown metric '" + m + "'");
    }
    any_fid = any_fid || m.rfind("fid", 0) == 0;
  }
  if (wanted.empty()) {
    throw BadSpecError("eval: --metrics selected nothing");
  }

  std::cerr << "eval: real " << o.real_dir << ", gen " << o.gen_dir
            << ", metrics " << o.metrics << ", seed " << o.seed << "\n";
  const auto pairs = pair_directories(o, any_fid);
  std::cerr << "eval: " << pairs.size() << " page pair(s)\n";

  nlohmann::ordered_json report;
  const auto emit = [&report](const char* key, double value) {
    char line[64];
    std::snprintf(line, sizeof line, "%s = %.4f", key, value);
    std::cout << line << "\n";
    report[key] = value;
  };

  for (const auto& m : wanted) {
    if (m == "iou") {
      double acc = 0.0;
      for (const auto& p : pairs) {
        acc += ele_iou(*p.real_page.rps, p.gen_rps);
      }
      emit("ele_iou", acc / static_cast<double>(pairs.size()));
    } else if (m == "sc") {
      double acc = 0.0;
      for (const auto& p : pairs) {
        acc += sc_score(*p.real_page.rps, p.gen_rps);
      }
      emit("sc_score", acc / static_cast<double>(pairs.size()));
    } else {
      const std::string vae_path =
          o.vae_path.empty() ? cache_dir() + "/vae.ckpt" : o.vae_path;
      const Vae vae = Vae::load(vae_path);
      HtmlEmbedder embedder = [&] {
        if (!o.emb_path.empty()) {
          return load_embedder(o.emb_path);
        }
        EmbedderConfig cfg;
        cfg.d = vae.config().latent_dim;
        Rng rng(o.seed + 9);
        return HtmlEmbedder(cfg, rng);
      }();
      if (m == "fid") {
        emit("fid", fid_for_variant(pairs,
                                    FidClassifierConfig::Variant::kOverall,
                                    vae, embedder, o, "fid"));
      } else if (m == "fid-layout") {
        emit("fid_layout",
             fid_for_variant(pairs, FidClassifierConfig::Variant::kLayout,
                             vae, embedder, o, "fid-layout"));
      } else {
        emit("fid_style",
             fid_for_variant(pairs, FidClassifierConfig::Variant::kStyle,
                             vae, embedder, o, "fid-style"));
      }
    }
  }

  if (!o.out_path.empty()) {
    const auto parent = std::filesystem::path(o.out_path).parent_path();
    if (!parent.empty()) {
      std::filesystem::create_directories(parent);
    }
    write_text_file(o.out_path, report.dump(2));
    std::cerr << "eval: report -> " << o.out_path << "\n";
  }
}

}  // namespace

void register_eval(CLI::App& app) {
  auto opts = std::make_shared<EvalOpts>();
  CLI::App* cmd = app.add_subcommand(
      "eval", "score generated parameters against a reference directory");
  cmd->add_option("--real", opts->real_dir, "reference dataset directory")
      ->required();
  cmd->add_option("--gen", opts->gen_dir,
                  "directory of generated NNN.rps.json files")
      ->required();
  cmd->add_option("--metrics", opts->metrics,
                  "comma list of iou, sc, fid, fid-layout, fid-style")
      ->capture_default_str();
  cmd->add_option("--out", opts->out_path, "write the JSON report here");
  cmd->add_option("--seed", opts->seed, "classifier/noise seed")
      ->capture_default_str();
  cmd->add_option("--vae", opts->vae_path,
                  "compressor checkpoint for the distance metrics");
  cmd->add_option("--emb", opts->emb_path,
                  "embedder checkpoint (default: fresh seeded embedder)");
  cmd->add_option("--fid-steps", opts->fid_steps,
                  "classifier training steps per variant")
      ->capture_default_str();
  cmd->add_option("--fid-batch", opts->fid_batch, "classifier batch size")
      ->capture_default_str();
  cmd->callback([opts] { run(*opts); });
}

}  // namespace webrpg::cli
