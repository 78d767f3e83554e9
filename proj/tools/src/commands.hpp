#pragma once

namespace CLI {
class App;
}

namespace webrpg::cli {

// Each command registers a CLI11 subcommand with a callback that does the
// work. Callbacks throw webrpg::Error on failure; main() maps that to exit
// code 1 with the message on stderr.
void register_render_css(CLI::App& app);
void register_ingest(CLI::App& app);
void register_synth(CLI::App& app);
void register_vc(CLI::App& app);
void register_train_vae(CLI::App& app);
void register_train_ar(CLI::App& app);
void register_train_dm(CLI::App& app);
void register_generate(CLI::App& app);
void register_eval(CLI::App& app);

}  // namespace webrpg::cli
