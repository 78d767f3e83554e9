#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"

#include "commands.hpp"
#include "webrpg/io.hpp"
#include "webrpg/rp_codec.hpp"

namespace webrpg::cli {

namespace {

struct RenderCssOpts {
  std::string rps_path;
  std::string out_path;
  std::string html_path;     // optional: wrap into a standalone preview
  std::string preview_path;  // where the preview page goes
};

void run(const RenderCssOpts& o) {
  const PageRps page = from_json(read_text_file(o.rps_path));
  const std::string css = emit_css(page);
  write_text_file(o.out_path, css);
  std::cerr << "render-css: " << page.size() << " elements -> " << o.out_path << "\n";

  if (!o.preview_path.empty()) {
    std::string body;
    if (!o.html_path.empty()) body = read_text_file(o.html_path);
    std::string preview = "<!DOCTYPE html>\n<html><head><meta charset=\"utf-8\">\n<style>\n";
    preview += css;
    preview += "</style>\n</head>\n<body>\n";
    preview += body;
    preview += "\n</body></html>\n";
    write_text_file(o.preview_path, preview);
    std::cerr << "render-css: preview -> " << o.preview_path << "\n";
  }
}

}  // namespace

void register_render_css(CLI::App& app) {
  auto opts = std::make_shared<RenderCssOpts>();
  CLI::App* cmd = app.add_subcommand(
      "render-css", "emit CSS (one .ele{N} rule per element) from an RP-JSON file");
  cmd->add_option("--rps", opts->rps_path, "input RP-JSON file")->required();
  cmd->add_option("--out", opts->out_path, "output CSS file")->required();
  cmd->add_option("--html", opts->html_path, "HTML body to embed in the preview page");
  cmd->add_option("--preview", opts->preview_path, "write a standalone preview HTML here");
  cmd->callback([opts] { run(*opts); });
}

}  // namespace webrpg::cli
