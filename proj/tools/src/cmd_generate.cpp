#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <filesystem>

#include "CLI11.hpp"

#include "commands.hpp"
#include "webrpg/ar.hpp"
#include "webrpg/dm.hpp"
#include "webrpg/dom.hpp"
#include "webrpg/errors.hpp"
#include "webrpg/harness.hpp"
#include "webrpg/io.hpp"
#include "webrpg/page.hpp"
#include "webrpg/rp_codec.hpp"

namespace webrpg::cli {

namespace {

struct GenerateOpts {
  std::string model = "ar";
  std::string html_path;
  std::string out_path;
  std::string css_path;
  std::string ckpt_path;
  uint64_t seed = 0;
};

void run(const GenerateOpts& o) {
  if (o.model != "ar" && o.model != "dm") {
    throw BadSpecError("generate: --model must be 'ar' or 'dm'");
  }
  const std::string ckpt =
      o.ckpt_path.empty() ? cache_dir() + "/" + o.model + ".ckpt"
                          : o.ckpt_path;
  std::cerr << "generate: model " << o.model << ", checkpoint " << ckpt
            << ", seed " << o.seed << "\n";

  const Vae vae = Vae::load(ckpt + ".vae");
  const HtmlEmbedder embedder = load_embedder(ckpt + ".emb");

  DomNode root = parse_html(read_text_file(o.html_path));
  drop_invisible(root);
  clean_tree(root);
  const Page page = build_page(root);
  std::cerr << "generate: " << page.size() << " element(s) from "
            << o.html_path << "\n";

  const HashedBagEncoder encoder(embedder.config().d_sem);
  const auto h = embedder.embed(page, encoder, o.html_path);

  std::vector<RpVector> tokens;
  if (o.model == "ar") {
    tokens = ArModel::load(ckpt).generate(h, vae, o.seed);
  } else {
    tokens = DmModel::load(ckpt).sample(h, vae, o.seed);
  }

  PageRps out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    out[page.elements[i].id] = tokens[i];
  }
  const auto parent = std::filesystem::path(o.out_path).parent_path();
  if (!parent.empty()) {
    std::filesystem::create_directories(parent);
  }
  write_text_file(o.out_path, to_json(out));
  std::cerr << "generate: parameters -> " << o.out_path << "\n";
  if (!o.css_path.empty()) {
    write_text_file(o.css_path, emit_css(out));
    std::cerr << "generate: css -> " << o.css_path << "\n";
  }
}

}  // namespace

void register_generate(CLI::App& app) {
  auto opts = std::make_shared<GenerateOpts>();
  CLI::App* cmd = app.add_subcommand(
      "generate", "predict rendering parameters for an HTML page");
  cmd->add_option("--model", opts->model, "generator kind: ar | dm")
      ->capture_default_str();
  cmd->add_option("--html", opts->html_path, "input HTML page")->required();
  cmd->add_option("--out", opts->out_path, "output RP-JSON path")->required();
  cmd->add_option("--css", opts->css_path, "also emit CSS here");
  cmd->add_option("--seed", opts->seed, "sampling seed")
      ->capture_default_str();
  cmd->add_option("--ckpt", opts->ckpt_path,
                  "model checkpoint (default: cache dir by model kind)");
  cmd->callback([opts] { run(*opts); });
}

}  // namespace webrpg::cli
