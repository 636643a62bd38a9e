#include <cstring>
#include <iostream>

#include <CLI11.hpp>

#include "align/error.hpp"
#include "commands.hpp"

namespace {

// `--config x.json` selects the JSON reader; anything else is TOML/INI.
bool json_config_requested(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) {
    std::string_view arg = argv[i];
    std::string_view path;
    if (arg == "--config" && i + 1 < argc) path = argv[i + 1];
    else if (arg.starts_with("--config=")) path = arg.substr(9);
    if (path.ends_with(".json")) return true;
  }
  return false;
}

int data_error(std::string_view kind, std::string_view message) {
  std::cerr << align::json{{"error", kind}, {"message", message}}.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace align::cli;
  CLI::App app{"Vision-language alignment toolkit for egocentric video corpora", "align"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML/INI or JSON file of option defaults");
  if (json_config_requested(argc, argv)) app.config_formatter(std::make_shared<JsonConfig>());
  app.set_version_flag("--version", "align 0.3.0");

  Globals g;
  app.add_flag("--force", g.force, "Proceed despite mismatched input lineage");
  app.add_flag("--no-timestamp", g.no_timestamp, "Omit created_at from manifests");
  app.add_option("--threads", g.threads, "Worker threads for parallel stages")->capture_default_str();

  add_synth(app, g);
  add_ingest(app, g);
  add_embed(app, g);
  add_score(app, g);
  add_summarize(app, g);
  add_report(app, g);
  add_sample(app, g);
  add_trials(app, g);
  add_serve(app, g);
  add_simulate(app, g);
  add_eval_model(app, g);
  add_stats(app, g);
  add_lemmas(app, g);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const align::Error& e) {
    return data_error(align::to_string(e.kind()), e.what());
  } catch (const align::json::exception& e) {
    return data_error("ParseError", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return data_error("IoError", e.what());
  } catch (const std::exception& e) {
    return data_error("Internal", e.what());
  }
  return 0;
}
