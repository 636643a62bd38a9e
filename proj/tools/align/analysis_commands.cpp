// stats, lemmas
#include <iostream>
#include <sstream>

#include "align/analysis.hpp"
#include "align/error.hpp"
#include "align/lexicon.hpp"
#include "align/rng.hpp"
#include "commands.hpp"

namespace align::cli {

void add_stats(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("stats", "Fit the validation, speaker and duration models into fits.json");
  struct Args {
    fs::path responses, study, alignment, corpus, out;
    int bootstrap = 1000;
    std::uint64_t seed = 0;
    StudyConfig study_config;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--alignment", a->alignment)->required();
  cmd->add_option("--responses", a->responses, "Human or simulated responses (validation model)");
  cmd->add_option("--study", a->study, "Study directory with trials.jsonl (validation model)");
  cmd->add_option("--corpus", a->corpus, "Corpus directory (speaker and duration models)");
  cmd->add_option("--bootstrap", a->bootstrap, "Bootstrap replicates")->capture_default_str();
  cmd->add_option("--max-catch-failures", a->study_config.max_catch_failures)->capture_default_str();
  cmd->add_option("--seed", a->seed)->capture_default_str();
  cmd->add_option("--out", a->out, "fits.json")->required();
  cmd->callback([a, &g] {
    if (a->bootstrap < 1) throw ConfigError("--bootstrap must be positive");
    if (a->responses.empty() != a->study.empty()) {
      throw ConfigError("--responses and --study must be given together");
    }
    if (a->responses.empty() && a->corpus.empty()) {
      throw ConfigError("nothing to fit: give --responses/--study and/or --corpus");
    }
    Provenance prov("stats", g);
    prov.input(a->alignment);
    const auto records = read_alignment_jsonl(a->alignment);
    json doc{{"deviation_notes",
              json::array({std::string(analysis::kClusterNote),
                           "The validation logistic regression is fitted on per-trial binomial rows "
                           "(k correct of n responses); the likelihood equals the per-response "
                           "Bernoulli model.",
                           "Smoothed curves are replaced by binned means with percentile bootstrap "
                           "confidence intervals.",
                           "GLM p-values are Wald z tests."})},
             {"seeds", {{"bootstrap", a->seed}}},
             {"bootstrap_replicates", a->bootstrap}};

    if (!a->responses.empty()) {
      prov.input(a->responses);
      prov.input(a->study / "trials.jsonl");
      const auto responses = read_responses_jsonl(a->responses);
      const auto trials = read_trials_jsonl(a->study / "trials.jsonl");
      const auto exclusions = apply_exclusions(responses, a->study_config);
      const auto kept = filter_kept(responses, exclusions);
      const auto table = accuracy_table(kept, trials, records);
      const auto v = analysis::validation_analysis(table.rows, a->bootstrap, derive_seed(a->seed, 1));
      json j = analysis::to_json(v);
      j["exclusions"] = {{"kept", exclusions.kept_annotators.size()},
                         {"excluded_annotators", exclusions.excluded_annotators},
                         {"rule", "more than " + std::to_string(a->study_config.max_catch_failures) +
                                      " failed catch trial(s)"}};
      j["uncovered_trials"] = table.uncovered_trials;
      doc["validation"] = std::move(j);
      std::cout << "validation: " << v.n_trials << " trials, " << v.n_responses << " responses";
      for (const auto& c : v.curves) {
        if (c.crossing_point) std::cout << ", crossing(" << to_string(c.condition) << ")=" << *c.crossing_point;
      }
      std::cout << "\n";
    }

    if (!a->corpus.empty()) {
      const Corpus corpus = load_corpus_dir(a->corpus, prov);
      const auto sp = analysis::speaker_rows(corpus, records);
      json speaker = analysis::to_json(analysis::fit_clustered(sp, a->bootstrap, derive_seed(a->seed, 2), g.threads));
      speaker["outcome"] = "prop_high per (child, session, speaker class)";
      speaker["cluster"] = "child_id";
      doc["speaker"] = std::move(speaker);

      const auto du = analysis::duration_rows(corpus, records);
      json duration = analysis::to_json(analysis::fit_clustered(du, a->bootstrap, derive_seed(a->seed, 3), g.threads));
      duration["outcome"] = "max_score per utterance";
      duration["cluster"] = "child_id";
      doc["duration"] = std::move(duration);

      std::vector<double> d, s;
      for (Eigen::Index i = 0; i < du.data.y.size(); ++i) {
        d.push_back(du.data.design.x(i, 1));
        s.push_back(du.data.y[i]);
      }
      doc["duration_quintiles"] = analysis::to_json(
          stats::binned_means(d, s, 5, stats::BinRule::Quantile, a->bootstrap, derive_seed(a->seed, 4)));
      std::cout << "speaker/duration models: " << sp.data.y.size() << " and " << du.data.y.size() << " rows\n";
    }
    const Manifest m = prov.finish(json{{"bootstrap", a->bootstrap},
                                        {"max_catch_failures", a->study_config.max_catch_failures}},
                                   a->seed);
    write_json_artifact(a->out, m, std::move(doc));
  });
}

void add_lemmas(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("lemmas", "Per-lemma alignment, norm merge and pooled lemma regression");
  struct Args {
    fs::path corpus, alignment, out;
    std::string lemmatizer = "identity";
    fs::path lemma_file;
    std::vector<std::string> norms;
    int min_utterances = 10;
    std::size_t min_lemmas = 50;
    stats::ImputationConfig imputation;
    bool standardize = false;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--corpus", a->corpus)->required();
  cmd->add_option("--alignment", a->alignment)->required();
  cmd->add_option("--lemmatizer", a->lemmatizer)
      ->check(CLI::IsMember({"identity", "lookup_table", "external"}))
      ->capture_default_str();
  cmd->add_option("--lemma-file", a->lemma_file, "form,lemma table or pre-lemmatized JSONL");
  cmd->add_option("--norms", a->norms, "field=path.csv (concreteness, imageability, sensorimotor_strength, action_strength)");
  cmd->add_option("--min-utterances", a->min_utterances)->capture_default_str();
  cmd->add_option("--min-lemmas", a->min_lemmas, "Fewest lemmas for the regression")->capture_default_str();
  cmd->add_option("--imputations", a->imputation.m)->capture_default_str();
  cmd->add_option("--donors", a->imputation.k_donors)->capture_default_str();
  cmd->add_option("--seed", a->imputation.seed)->capture_default_str();
  cmd->add_flag("--standardize", a->standardize, "Also report a fit on z-scored predictors");
  cmd->add_option("--out", a->out, "Output directory")->required();
  cmd->callback([a, &g] {
    a->imputation.validate();
    Provenance prov("lemmas", g);
    const Corpus corpus = load_corpus_dir(a->corpus, prov);
    prov.input(a->alignment);
    const auto records = read_alignment_jsonl(a->alignment);
    Lemmatizer lemmatizer = Lemmatizer::identity();
    if (a->lemmatizer != "identity") {
      if (a->lemma_file.empty()) throw ConfigError("--lemmatizer " + a->lemmatizer + " requires --lemma-file");
      prov.input(a->lemma_file);
      lemmatizer = a->lemmatizer == "lookup_table" ? Lemmatizer::from_table(a->lemma_file)
                                                   : Lemmatizer::from_external(a->lemma_file);
    }
    auto lemma_records = aggregate_lemmas(lemmatize_corpus(corpus, lemmatizer), records, a->min_utterances);
    std::vector<NormSource> sources;
    for (const auto& spec : a->norms) {
      const auto eq = spec.find('=');
      if (eq == std::string::npos) throw ConfigError("--norms entry '" + spec + "' is not field=path");
      sources.push_back({parse_norm_field(spec.substr(0, eq)), spec.substr(eq + 1)});
      prov.input(sources.back().path);
    }
    const auto merge = merge_norms(lemma_records, sources);
    for (const auto& w : merge.warnings) std::cerr << "warning: " << w << "\n";

    json fit_doc{{"n_lemmas", lemma_records.size()},
                 {"min_utterances", a->min_utterances},
                 {"norm_matches", merge.matched},
                 {"merge_warnings", merge.warnings}};
    LemmaRegressionOptions options;
    options.imputation = a->imputation;
    options.min_lemmas = a->min_lemmas;
    auto report = [&](const LemmaRegression& r) {
      return json{{"pooled", analysis::to_json(r.pooled)},
                  {"predictors", r.predictors},
                  {"standardized", r.standardized},
                  {"missing_cells", r.missing_cells},
                  {"notes", r.notes}};
    };
    fit_doc["raw"] = report(lemma_regression(lemma_records, options));
    if (a->standardize) {
      options.standardize = true;
      fit_doc["standardized"] = report(lemma_regression(lemma_records, options));
    }
    const Manifest m = prov.finish(json{{"lemmatizer", a->lemmatizer},
                                        {"min_utterances", a->min_utterances},
                                        {"imputations", a->imputation.m},
                                        {"donors", a->imputation.k_donors},
                                        {"standardize", a->standardize}},
                                   a->imputation.seed);
    std::ostringstream body;
    write_lemmas_jsonl(body, lemma_records);
    write_jsonl_artifact(a->out / "lemmas.jsonl", m, body.str());
    write_json_artifact(a->out / "lemma_fit.json", m, std::move(fit_doc));
    std::cout << "aggregated " << lemma_records.size() << " lemmas\n";
  });
}

}  // namespace align::cli
