// sample, trials, serve, simulate-annotators, eval-model
#include <atomic>
#include <csignal>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "align/alignment.hpp"
#include "align/analysis.hpp"
#include "align/embedding.hpp"
#include "align/error.hpp"
#include "align/rng.hpp"
#include "align/service.hpp"
#include "align/study.hpp"
#include "align/text.hpp"
#include "commands.hpp"

namespace align::cli {

namespace {

std::vector<Trial> load_study_trials(const fs::path& study, Provenance& prov) {
  prov.input(study / "trials.jsonl");
  return read_trials_jsonl(study / "trials.jsonl");
}

Assignment load_assignment(const fs::path& study, Provenance& prov) {
  prov.input(study / "assignment.json");
  return assignment_from_json(read_json_file(study / "assignment.json"));
}

std::vector<AlignmentRecord> load_alignment(const fs::path& path, Provenance& prov) {
  prov.input(path);
  return read_alignment_jsonl(path);
}

AccuracyCurve parse_curve(const std::string& spec) {
  AccuracyCurve c;
  for (const auto& part : split_list(spec)) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("curve term '" + part + "' is not key=value");
    const std::string key(text::trim(std::string_view(part).substr(0, eq)));
    double value = 0.0;
    try {
      value = std::stod(part.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("curve term '" + part + "' has a non-numeric value");
    }
    if (key == "b0") c.b0 = value;
    else if (key == "b1") c.b1 = value;
    else if (key == "floor") c.floor = value;
    else throw ConfigError("unknown curve parameter '" + key + "' (expected b0, b1, floor)");
  }
  if (c.floor < 0.0 || c.floor >= 1.0) throw ConfigError("curve floor must be in [0, 1)");
  return c;
}

std::atomic<service::HttpServer*> g_server{nullptr};

extern "C" void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace

void add_sample(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("sample", "Stratified sample of utterance/frame pairs for the study");
  struct Args {
    fs::path corpus, alignment, out;
    SamplerConfig config;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--corpus", a->corpus)->required();
  cmd->add_option("--alignment", a->alignment)->required();
  cmd->add_option("--bins", a->config.n_score_bins)->capture_default_str();
  cmd->add_option("--cap", a->config.per_bin_cap, "First-phase cap per score bin")->capture_default_str();
  cmd->add_option("--min-per-label", a->config.per_activity_min, "Minimum per activity and location label")
      ->capture_default_str();
  cmd->add_option("--seed", a->config.seed)->capture_default_str();
  cmd->add_option("--out", a->out, "pairs.jsonl")->required();
  cmd->callback([a, &g] {
    a->config.per_location_min = a->config.per_activity_min;
    a->config.validate();
    Provenance prov("sample", g);
    const Corpus corpus = load_corpus_dir(a->corpus, prov);
    const auto records = load_alignment(a->alignment, prov);
    const auto report = stratified_sample(records, corpus, a->config);
    const Manifest m = prov.finish(json{{"bins", a->config.n_score_bins},
                                        {"cap", a->config.per_bin_cap},
                                        {"min_per_label", a->config.per_activity_min},
                                        {"bin_rule", "equal-width"}},
                                   a->config.seed);
    std::ostringstream body;
    write_pairs_jsonl(body, report.pairs);
    write_jsonl_artifact(a->out, m, body.str());
    auto report_path = a->out;
    report_path.replace_extension(".report.json");
    write_json_artifact(report_path, m,
                        json{{"n_pairs", report.pairs.size()},
                             {"bin_lo", report.bin_lo},
                             {"bin_hi", report.bin_hi},
                             {"bin_pool", report.bin_pool},
                             {"bin_phase1", report.bin_phase1},
                             {"activity_counts", report.activity_counts},
                             {"location_counts", report.location_counts}});
    std::cout << "sampled " << report.pairs.size() << " pairs\n";
  });
}

void add_trials(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("trials", "Build 4AFC trials for both conditions and assign annotators");
  struct Args {
    fs::path pairs, corpus, out;
    int annotators = 80;
    StudyConfig study;
    std::uint64_t seed = 0;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--pairs", a->pairs)->required();
  cmd->add_option("--corpus", a->corpus, "Corpus directory (utterance text is copied for serving)");
  cmd->add_option("--annotators", a->annotators)->capture_default_str();
  cmd->add_option("--per-trial", a->study.annotations_per_trial_target, "Annotations per trial")->capture_default_str();
  cmd->add_option("--catch", a->study.catch_trials_per_annotator, "Catch trials per annotator")->capture_default_str();
  cmd->add_option("--max-catch-failures", a->study.max_catch_failures)->capture_default_str();
  cmd->add_option("--seed", a->seed)->capture_default_str();
  cmd->add_option("--out", a->out, "Study directory")->required();
  cmd->callback([a, &g] {
    a->study.validate();
    Provenance prov("trials", g);
    prov.input(a->pairs);
    const auto pairs = read_pairs_jsonl(a->pairs);
    std::optional<Corpus> corpus;
    if (!a->corpus.empty()) corpus = load_corpus_dir(a->corpus, prov);
    auto trials = generate_trials(pairs, Condition::Image, derive_seed(a->seed, 1));
    auto utterance = generate_trials(pairs, Condition::Utterance, derive_seed(a->seed, 2));
    trials.insert(trials.end(), utterance.begin(), utterance.end());
    const Assignment assignment = assign_trials(trials, a->annotators, a->study, derive_seed(a->seed, 3));
    const Manifest m = prov.finish(json{{"annotators", a->annotators},
                                        {"annotations_per_trial", a->study.annotations_per_trial_target},
                                        {"catch_trials_per_annotator", a->study.catch_trials_per_annotator},
                                        {"max_catch_failures", a->study.max_catch_failures}},
                                   a->seed);
    std::ostringstream body;
    write_trials_jsonl(body, trials);
    write_jsonl_artifact(a->out / "trials.jsonl", m, body.str());
    write_json_artifact(a->out / "assignment.json", m, assignment_to_json(assignment));
    if (corpus) {
      std::ostringstream t;
      for (const auto& u : corpus->utterances()) {
        t << json{{"utterance_id", u.utterance_id}, {"text", u.text}}.dump() << '\n';
      }
      write_jsonl_artifact(a->out / "transcripts.jsonl", m, t.str());
    }
    std::cout << "wrote " << trials.size() << " trials, " << assignment.slots.size()
              << " annotator slots (mean test trials per annotator";
    for (const auto& [c, v] : assignment.mean_test_per_annotator) std::cout << " " << c << "=" << v;
    std::cout << ")\n";
  });
}

void add_serve(CLI::App& app, Globals&) {
  auto* cmd = app.add_subcommand("serve", "Run the annotation service");
  struct Args {
    std::string study, bind, log_dir, media, public_dir;
    StudyConfig config;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--study", a->study, "Study directory")->envname("ALIGN_STUDY_DIR");
  cmd->add_option("--bind", a->bind, "host:port")->envname("ALIGN_BIND_ADDR")->default_str("127.0.0.1:8080");
  cmd->add_option("--log-dir", a->log_dir, "Append-only logs (default <study>/logs)");
  cmd->add_option("--media", a->media, "Directory served under /media (default <study>/media)");
  cmd->add_option("--public", a->public_dir, "Annotator UI build served at / (default <study>/public)");
  cmd->add_option("--max-catch-failures", a->config.max_catch_failures)->capture_default_str();
  cmd->callback([a] {
    std::string bind = a->bind.empty() ? "127.0.0.1:8080" : a->bind;
    const auto colon = bind.rfind(':');
    if (colon == std::string::npos) throw ConfigError("--bind must be host:port");
    const std::string host = bind.substr(0, colon);
    int port = 0;
    try {
      port = std::stoi(bind.substr(colon + 1));
    } catch (const std::exception&) {
      throw ConfigError("--bind port is not a number");
    }
    std::unique_ptr<service::StudyService> svc;
    std::optional<fs::path> media, pub;
    if (a->study.empty()) {
      std::cerr << "no study directory given; serving 503 until restarted with --study\n";
      svc = std::make_unique<service::StudyService>();
    } else {
      const fs::path study = a->study;
      const fs::path logs = a->log_dir.empty() ? study / "logs" : fs::path(a->log_dir);
      svc = std::make_unique<service::StudyService>(service::StudyData::load(study), logs, a->config);
      media = a->media.empty() ? study / "media" : fs::path(a->media);
      pub = a->public_dir.empty() ? study / "public" : fs::path(a->public_dir);
    }
    if (!a->media.empty()) media = a->media;
    if (!a->public_dir.empty()) pub = a->public_dir;
    service::HttpServer server(*svc, media, pub);
    const int bound = server.bind(host, port);
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "listening on http://" << host << ":" << bound << "\n";
    server.listen();
    g_server = nullptr;
  });
}

void add_simulate(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("simulate-annotators", "Draw responses from a logistic accuracy curve");
  struct Args {
    fs::path study, alignment, out;
    std::string curve = "b0=-4.625,b1=18.5";
    SimulationConfig sim;
    std::vector<int> inattentive;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--study", a->study)->required();
  cmd->add_option("--alignment", a->alignment)->required();
  cmd->add_option("--curve", a->curve, "b0=..,b1=..[,floor=..]")->capture_default_str();
  cmd->add_option("--catch-accuracy", a->sim.catch_accuracy)->capture_default_str();
  cmd->add_option("--inattentive", a->inattentive, "Slots answering catch trials carelessly")->delimiter(',');
  cmd->add_option("--inattentive-catch-accuracy", a->sim.inattentive_catch_accuracy)->capture_default_str();
  cmd->add_option("--seed", a->sim.seed)->capture_default_str();
  cmd->add_option("--out", a->out, "responses.jsonl")->required();
  cmd->callback([a, &g] {
    Provenance prov("simulate-annotators", g);
    const auto trials = load_study_trials(a->study, prov);
    const auto assignment = load_assignment(a->study, prov);
    const auto records = load_alignment(a->alignment, prov);
    a->sim.curve = parse_curve(a->curve);
    a->sim.inattentive_slots = a->inattentive;
    const auto responses = simulate_annotators(assignment, trials, records, a->sim);
    const Manifest m = prov.finish(json{{"curve", {{"b0", a->sim.curve.b0}, {"b1", a->sim.curve.b1},
                                                   {"floor", a->sim.curve.floor}}},
                                        {"catch_accuracy", a->sim.catch_accuracy},
                                        {"inattentive_slots", a->inattentive},
                                        {"inattentive_catch_accuracy", a->sim.inattentive_catch_accuracy}},
                                   a->sim.seed);
    std::ostringstream body;
    write_responses_jsonl(body, responses);
    write_jsonl_artifact(a->out, m, body.str());
    std::cout << "simulated " << responses.size() << " responses\n";
  });
}

void add_eval_model(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("eval-model", "Model 4AFC choices by softmax over alignment scores");
  struct Args {
    fs::path study, text, image, alignment, out;
    double temperature = 1.0;
    int bootstrap = 1000;
    std::uint64_t seed = 0;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--study", a->study)->required();
  cmd->add_option("--text", a->text)->required();
  cmd->add_option("--image", a->image)->required();
  cmd->add_option("--alignment", a->alignment, "Adds the accuracy-by-score-decile curve");
  cmd->add_option("--temperature", a->temperature)->capture_default_str();
  cmd->add_option("--bootstrap", a->bootstrap)->capture_default_str();
  cmd->add_option("--seed", a->seed)->capture_default_str();
  cmd->add_option("--out", a->out, "model.json")->required();
  cmd->callback([a, &g] {
    if (!(a->temperature > 0.0)) throw ConfigError("--temperature must be positive");
    Provenance prov("eval-model", g);
    const auto trials = load_study_trials(a->study, prov);
    prov.input(a->text);
    prov.input(a->image);
    const auto text = load_embeddings(a->text, EmbeddingKind::Text);
    const auto image = load_embeddings(a->image, EmbeddingKind::Image);
    std::map<std::string, double> score_of;
    if (!a->alignment.empty()) {
      for (const auto& r : load_alignment(a->alignment, prov)) score_of[r.utterance_id] = r.max_score;
    }
    json choices = json::array();
    std::map<Condition, std::pair<std::vector<double>, std::vector<double>>> curve_data;
    std::map<Condition, std::pair<int, int>> totals;
    for (const auto& t : trials) {
      if (t.is_catch) continue;
      const auto c = model_4afc(t, text, image, a->temperature);
      choices.push_back({{"trial_id", c.trial_id}, {"condition", to_string(t.condition)},
                         {"scores", c.scores},     {"probs", c.probs},
                         {"chosen_index", c.chosen_index}, {"correct", c.correct}});
      totals[t.condition].first += c.correct;
      totals[t.condition].second += 1;
      auto s = score_of.find(t.target_utterance_id);
      if (s != score_of.end()) {
        curve_data[t.condition].first.push_back(s->second);
        curve_data[t.condition].second.push_back(c.correct ? 1.0 : 0.0);
      }
    }
    json by_condition = json::object();
    for (const auto& [cond, kn] : totals) {
      json entry{{"n", kn.second}, {"accuracy", static_cast<double>(kn.first) / kn.second}};
      auto it = curve_data.find(cond);
      if (it != curve_data.end() && it->second.first.size() >= 10) {
        entry["deciles"] = analysis::to_json(analysis::model_curve(
            it->second.first, it->second.second, a->bootstrap, derive_seed(a->seed, static_cast<int>(cond))));
      }
      by_condition[std::string(to_string(cond))] = std::move(entry);
    }
    const Manifest m = prov.finish(json{{"temperature", a->temperature}, {"bootstrap", a->bootstrap}}, a->seed);
    write_json_artifact(a->out, m, json{{"by_condition", by_condition}, {"choices", choices}});
    std::cout << "evaluated " << choices.size() << " trials\n";
  });
}

}  // namespace align::cli
