#include <exception>
#include <iostream>

#include "CLI11.hpp"

#include "commands.hpp"
#include "webrpg/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"web rendering-parameter pipeline"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  webrpg::cli::register_ingest(app);
  webrpg::cli::register_synth(app);
  webrpg::cli::register_vc(app);
  webrpg::cli::register_train_vae(app);
  webrpg::cli::register_train_ar(app);
  webrpg::cli::register_train_dm(app);
  webrpg::cli::register_generate(app);
  webrpg::cli::register_render_css(app);
  webrpg::cli::register_eval(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const webrpg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
