#include <future>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"

#include "commands.hpp"
#include "webrpg/io.hpp"
#include "webrpg/page.hpp"
#include "webrpg/vc_metric.hpp"

namespace webrpg::cli {

namespace {

struct VcOpts {
  std::vector<std::string> pages;
  std::string out_path;
  double threshold = 0.1;
};

void run(const VcOpts& o) {
  std::cerr << "vc: threshold " << o.threshold << ", " << o.pages.size()
            << " page(s)\n";

  // Pages are independent; score them on worker threads and join in input
  // order so the report stays deterministic.
  std::vector<std::future<VcReport>> futures;
  futures.reserve(o.pages.size());
  for (const std::string& path : o.pages) {
    futures.push_back(std::async(std::launch::async, [path] {
      return vc_total(page_from_json(read_text_file(path)));
    }));
  }

  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (size_t i = 0; i < o.pages.size(); ++i) {
    const VcReport r = futures[i].get();
    nlohmann::ordered_json entry =
        nlohmann::ordered_json::parse(vc_report_to_json(r));
    entry["passes_filter"] = passes_filter(r, o.threshold);
    out[o.pages[i]] = std::move(entry);
  }

  const std::string text = out.dump(2);
  if (o.out_path.empty()) {
    std::cout << text << "\n";
  } else {
    write_text_file(o.out_path, text);
    std::cerr << "vc: report -> " << o.out_path << "\n";
  }
}

}  // namespace

void register_vc(CLI::App& app) {
  auto opts = std::make_shared<VcOpts>();
  CLI::App* cmd =
      app.add_subcommand("vc", "score visual complexity of page JSON files");
  cmd->add_option("pages", opts->pages, "page JSON files")->required();
  cmd->add_option("--threshold", opts->threshold, "filter threshold")
      ->capture_default_str();
  cmd->add_option("--out", opts->out_path, "write the report here instead of stdout");
  cmd->callback([opts] { run(*opts); });
}

}  // namespace webrpg::cli
