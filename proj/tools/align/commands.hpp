#pragma once

#include <CLI11.hpp>

#include "common.hpp"

namespace align::cli {

void add_synth(CLI::App& app, Globals& g);
void add_ingest(CLI::App& app, Globals& g);
void add_embed(CLI::App& app, Globals& g);
void add_score(CLI::App& app, Globals& g);
void add_summarize(CLI::App& app, Globals& g);
void add_report(CLI::App& app, Globals& g);
void add_sample(CLI::App& app, Globals& g);
void add_trials(CLI::App& app, Globals& g);
void add_serve(CLI::App& app, Globals& g);
void add_simulate(CLI::App& app, Globals& g);
void add_eval_model(CLI::App& app, Globals& g);
void add_stats(CLI::App& app, Globals& g);
void add_lemmas(CLI::App& app, Globals& g);

}  // namespace align::cli
