// synth, ingest, embed, score, summarize, report
#include <fstream>
#include <iostream>
#include <sstream>

#include "align/alignment.hpp"
#include "align/embedding.hpp"
#include "align/error.hpp"
#include "align/synth.hpp"
#include "align/text.hpp"
#include "commands.hpp"

namespace align::cli {

namespace {

std::string csv_cell(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream o;
  o.setf(std::ios::fixed);
  o.precision(digits);
  o << v;
  return o.str();
}

void emit_embeddings(const EmbeddingStore& store, const fs::path& out, const Manifest& m) {
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_embeddings(store, out);
  write_sidecar(out, m);
}

std::vector<GroupKey> parse_keys(const std::string& by) {
  std::vector<GroupKey> keys;
  for (const auto& k : split_list(by)) keys.push_back(parse_group_key(k));
  return keys;
}

std::string summary_csv(std::span<const GroupKey> keys, std::span<const SummaryRow> rows) {
  std::ostringstream out;
  for (auto k : keys) out << to_string(k) << ',';
  out << "n_utterances,n_high,prop_high,mean_score\n";
  for (const auto& r : rows) {
    for (auto k : keys) {
      switch (k) {
        case GroupKey::Child: out << csv_cell(*r.child_id); break;
        case GroupKey::AgeBin: out << *r.age_bin_months; break;
        case GroupKey::Speaker: out << to_string(*r.speaker); break;
        case GroupKey::Session: out << csv_cell(*r.session_id); break;
      }
      out << ',';
    }
    out << r.n_utterances << ',' << r.n_high << ',' << fixed(r.prop_high) << ','
        << fixed(r.mean_score) << '\n';
  }
  return out.str();
}

json summary_json(std::span<const SummaryRow> rows) {
  json out = json::array();
  for (const auto& r : rows) {
    json j{{"n_utterances", r.n_utterances}, {"n_high", r.n_high}, {"prop_high", r.prop_high},
           {"mean_score", r.mean_score}};
    if (r.child_id) j["child_id"] = *r.child_id;
    if (r.age_bin_months) j["age_bin_months"] = *r.age_bin_months;
    if (r.speaker) j["speaker"] = to_string(*r.speaker);
    if (r.session_id) j["session_id"] = *r.session_id;
    out.push_back(std::move(j));
  }
  return out;
}

SpeakerMap load_speaker_map(const fs::path& path) {
  std::map<std::string, Speaker> table;
  std::ifstream in(path);
  if (!in) throw IoError("cannot open speaker map " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty() || line.front() == '#') continue;
    const auto cells = text::split(line, ',');
    if (cells.size() != 2) throw ParseError(path.filename().string() + ":" + std::to_string(line_no) + ": expected label,class");
    const std::string label = text::ascii_lower(text::trim(cells[0]));
    if (line_no == 1 && label == "label") continue;
    const auto cls = parse_speaker_name(text::trim(cells[1]));
    if (!cls) throw ParseError(path.filename().string() + ":" + std::to_string(line_no) + ": unknown speaker class");
    table[label] = *cls;
  }
  return SpeakerMap(std::move(table));
}

}  // namespace

void add_synth(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("synth", "Write a planted synthetic corpus with fixture embeddings");
  auto spec = std::make_shared<synth::CorpusSpec>();
  auto out = std::make_shared<fs::path>();
  cmd->add_option("--out", *out, "Output directory")->required();
  cmd->add_option("--seed", spec->seed)->capture_default_str();
  cmd->add_option("--dim", spec->dim)->capture_default_str();
  cmd->add_option("--children", spec->n_children)->capture_default_str();
  cmd->add_option("--sessions", spec->sessions_per_child, "Sessions per child")->capture_default_str();
  cmd->add_option("--utterances", spec->utterances_per_session, "Utterances per session")->capture_default_str();
  cmd->add_option("--adult-fraction", spec->adult_fraction)->capture_default_str();
  cmd->add_option("--adult-high-rate", spec->adult_high_rate)->capture_default_str();
  cmd->add_option("--child-high-rate", spec->child_high_rate)->capture_default_str();
  cmd->add_option("--shared-weight", spec->shared_weight)->capture_default_str();
  cmd->add_option("--tau", spec->tau)->capture_default_str();
  cmd->callback([spec, out, &g] {
    const auto planted = synth::make_corpus(*spec);
    Provenance prov("synth", g);
    json config{{"dim", spec->dim},
                {"children", spec->n_children},
                {"sessions_per_child", spec->sessions_per_child},
                {"utterances_per_session", spec->utterances_per_session},
                {"adult_fraction", spec->adult_fraction},
                {"adult_high_rate", spec->adult_high_rate},
                {"child_high_rate", spec->child_high_rate},
                {"shared_weight", spec->shared_weight},
                {"tau", spec->tau}};
    const Manifest m = prov.finish(config, spec->seed);
    write_corpus(planted.corpus, *out, manifest_line(m));
    emit_embeddings(planted.text_store(), *out / "text.emb", m);
    emit_embeddings(planted.image_store(), *out / "image.emb", m);
    json doc{{"n_utterances", planted.corpus.utterances().size()},
             {"n_high", planted.n_high},
             {"planted_max", planted.planted_max}};
    write_json_artifact(*out / "planted.json", m, doc);
    std::cout << "wrote " << planted.corpus.utterances().size() << " utterances, "
              << planted.corpus.frames().size() << " frames to " << out->string() << "\n";
  });
}

void add_ingest(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("ingest", "Validate transcripts, frames and sessions into a canonical corpus");
  struct Args {
    fs::path transcripts, frames, sessions, out, speaker_map, vocab;
    double end_slack = 1.0;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--transcripts", a->transcripts)->required()->check(CLI::ExistingFile);
  cmd->add_option("--frames", a->frames)->required()->check(CLI::ExistingFile);
  cmd->add_option("--sessions", a->sessions)->required()->check(CLI::ExistingFile);
  cmd->add_option("--out", a->out, "Output corpus directory")->required();
  cmd->add_option("--speaker-map", a->speaker_map, "CSV of diarizer label,speaker class")->check(CLI::ExistingFile);
  cmd->add_option("--vocab", a->vocab, "JSON {\"activities\":[...],\"locations\":[...]}")->check(CLI::ExistingFile);
  cmd->add_option("--end-slack", a->end_slack, "Seconds an utterance may run past its session")->capture_default_str();
  cmd->callback([a, &g] {
    Provenance prov("ingest", g);
    prov.input(a->transcripts);
    prov.input(a->frames);
    prov.input(a->sessions);
    LoadOptions options;
    options.end_slack_s = a->end_slack;
    if (!a->speaker_map.empty()) {
      prov.input(a->speaker_map);
      options.speakers = load_speaker_map(a->speaker_map);
    }
    if (!a->vocab.empty()) {
      prov.input(a->vocab);
      const json v = read_json_file(a->vocab);
      LabelVocab vocab;
      for (const auto& s : v.value("activities", json::array())) vocab.activities.insert(s.get<std::string>());
      for (const auto& s : v.value("locations", json::array())) vocab.locations.insert(s.get<std::string>());
      options.label_vocab = std::move(vocab);
    }
    const Corpus corpus = load_corpus(a->transcripts, a->frames, a->sessions, options);
    const Manifest m = prov.finish(json{{"end_slack_s", a->end_slack}}, std::nullopt);
    write_corpus(corpus, a->out, manifest_line(m));
    json report{{"n_sessions", corpus.sessions().size()},
                {"n_utterances", corpus.utterances().size()},
                {"n_frames", corpus.frames().size()},
                {"warnings", std::vector<std::string>(corpus.warnings().begin(), corpus.warnings().end())}};
    write_json_artifact(a->out / "ingest_report.json", m, report);
    for (const auto& w : corpus.warnings()) std::cerr << "warning: " << w << "\n";
    std::cout << "ingested " << corpus.utterances().size() << " utterances\n";
  });
}

void add_embed(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("embed", "Produce a validated EMB1 embedding file");
  struct Args {
    fs::path corpus, out, input;
    std::string kind = "text", provider = "fixture", endpoint;
    std::size_t dim = 512;
    std::uint64_t seed = 0;
    int max_attempts = 5, backoff_ms = 200, timeout_ms = 30000;
    std::size_t batch_size = 256;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--corpus", a->corpus, "Corpus directory")->required();
  cmd->add_option("--kind", a->kind)->check(CLI::IsMember({"text", "image"}))->capture_default_str();
  cmd->add_option("--provider", a->provider)->check(CLI::IsMember({"fixture", "file", "remote"}))->capture_default_str();
  cmd->add_option("--input", a->input, "Precomputed EMB1 file (file provider)");
  cmd->add_option("--endpoint", a->endpoint, "http://host:port (remote provider)");
  cmd->add_option("--dim", a->dim, "Fixture dimension")->capture_default_str();
  cmd->add_option("--seed", a->seed)->capture_default_str();
  cmd->add_option("--max-attempts", a->max_attempts)->capture_default_str();
  cmd->add_option("--backoff-ms", a->backoff_ms)->capture_default_str();
  cmd->add_option("--timeout-ms", a->timeout_ms)->capture_default_str();
  cmd->add_option("--batch-size", a->batch_size)->capture_default_str();
  cmd->add_option("--out", a->out)->required();
  cmd->callback([a, &g] {
    Provenance prov("embed", g);
    const Corpus corpus = load_corpus_dir(a->corpus, prov);
    const EmbeddingKind kind = parse_embedding_kind(a->kind);
    std::vector<EmbedItem> items;
    if (kind == EmbeddingKind::Text) {
      for (const auto& u : corpus.utterances()) items.push_back({u.utterance_id, u.text});
    } else {
      for (const auto& f : corpus.frames()) items.push_back({f.frame_id, "frames/" + f.frame_id});
    }
    json config{{"kind", a->kind}, {"provider", a->provider}};
    std::optional<EmbeddingStore> store;
    if (a->provider == "fixture") {
      FixtureProvider provider(a->seed, a->dim);
      std::vector<std::string> ids;
      for (const auto& i : items) ids.push_back(i.id);
      store = provider.build(kind, ids);
      config["dim"] = a->dim;
    } else if (a->provider == "file") {
      if (a->input.empty()) throw ConfigError("--provider file requires --input");
      prov.input(a->input);
      store = load_embeddings(a->input, kind);
      std::vector<std::string> missing;
      for (const auto& i : items) {
        if (!store->contains(i.id)) missing.push_back(i.id);
      }
      if (!missing.empty()) {
        throw MissingEmbedding(std::to_string(missing.size()) + " corpus ids have no vector, first '" +
                               missing.front() + "'");
      }
    } else {
      ProviderConfig pc;
      pc.mode = ProviderMode::Remote;
      if (!a->endpoint.empty()) pc.endpoint = a->endpoint;
      pc.max_attempts = a->max_attempts;
      pc.initial_backoff = std::chrono::milliseconds(a->backoff_ms);
      pc.request_timeout = std::chrono::milliseconds(a->timeout_ms);
      pc.batch_size = a->batch_size;
      store = fetch_remote(pc, kind, items);
      config["endpoint"] = a->endpoint;
    }
    const Manifest m = prov.finish(config, a->provider == "fixture" ? std::optional(a->seed) : std::nullopt);
    emit_embeddings(*store, a->out, m);
    std::cout << "wrote " << store->size() << " " << a->kind << " vectors (dim " << store->dim() << ")\n";
  });
}

void add_score(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("score", "Score every utterance against its concurrent frames");
  struct Args {
    fs::path corpus, text, image, out;
    double tau = 0.24;
    std::string speaker;
    bool per_frame = false;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--corpus", a->corpus)->required();
  cmd->add_option("--text", a->text, "Text EMB1 file")->required();
  cmd->add_option("--image", a->image, "Image EMB1 file")->required();
  cmd->add_option("--tau", a->tau, "High-alignment threshold")->capture_default_str();
  cmd->add_option("--speaker", a->speaker, "Only score one speaker class");
  cmd->add_flag("--per-frame", a->per_frame, "Include per-frame scores");
  cmd->add_option("--out", a->out, "alignment.jsonl")->required();
  cmd->callback([a, &g] {
    Provenance prov("score", g);
    const Corpus corpus = load_corpus_dir(a->corpus, prov);
    prov.input(a->text);
    prov.input(a->image);
    const auto text = load_embeddings(a->text, EmbeddingKind::Text);
    const auto image = load_embeddings(a->image, EmbeddingKind::Image);
    AnalysisConfig config;
    config.tau = a->tau;
    std::optional<Speaker> filter;
    if (!a->speaker.empty()) {
      filter = parse_speaker_name(a->speaker);
      if (!filter) throw ConfigError("unknown speaker class '" + a->speaker + "'");
    }
    const auto result = score_corpus(corpus, {text, image}, config, filter, g.threads);
    json cfg{{"tau", a->tau}, {"per_frame", a->per_frame}};
    if (filter) cfg["speaker"] = to_string(*filter);
    const Manifest m = prov.finish(cfg, std::nullopt);
    std::ostringstream body;
    write_alignment_jsonl(body, result.records, a->per_frame);
    write_jsonl_artifact(a->out, m, body.str());
    json skipped = json::array();
    std::map<std::string, int> reasons;
    for (const auto& s : result.skipped) {
      skipped.push_back({{"utterance_id", s.utterance_id}, {"reason", s.reason}, {"detail", s.detail}});
      ++reasons[s.reason];
    }
    auto skip_path = a->out;
    skip_path.replace_extension(".skipped.json");
    write_json_artifact(skip_path, m, json{{"n_scored", result.records.size()},
                                           {"n_skipped", result.skipped.size()},
                                           {"by_reason", reasons},
                                           {"skipped", skipped}});
    std::size_t high = 0;
    for (const auto& r : result.records) high += r.is_high;
    std::cout << "scored " << result.records.size() << " utterances (" << high << " high, "
              << result.skipped.size() << " skipped)\n";
  });
}

void add_summarize(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("summarize", "Proportion of high-alignment utterances per group");
  struct Args {
    fs::path corpus, alignment, out;
    std::string by = "age";
    int age_bin_width = 2;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--corpus", a->corpus)->required();
  cmd->add_option("--alignment", a->alignment)->required();
  cmd->add_option("--by", a->by, "Comma list of child,age,speaker,session (empty: overall)")->capture_default_str();
  cmd->add_option("--age-bin-width", a->age_bin_width, "Months")->capture_default_str();
  cmd->add_option("--out", a->out, "summary.json")->required();
  cmd->callback([a, &g] {
    Provenance prov("summarize", g);
    const Corpus corpus = load_corpus_dir(a->corpus, prov);
    prov.input(a->alignment);
    const auto records = read_alignment_jsonl(a->alignment);
    const auto keys = parse_keys(a->by);
    const auto overall = summarize(records, corpus, {}, a->age_bin_width);
    const auto rows = summarize(records, corpus, keys, a->age_bin_width);
    const Manifest m = prov.finish(json{{"by", a->by}, {"age_bin_width_months", a->age_bin_width}}, std::nullopt);
    write_json_artifact(a->out, m, json{{"overall", summary_json(overall).at(0)}, {"groups", summary_json(rows)}});
    std::cout << "overall prop_high " << fixed(overall.front().prop_high) << " over "
              << overall.front().n_utterances << " utterances\n";
  });
}

void add_report(CLI::App& app, Globals& g) {
  auto* cmd = app.add_subcommand("report", "Summary table CSV citing every upstream manifest");
  struct Args {
    fs::path corpus, alignment, out;
    std::vector<fs::path> cite;
    std::string by = "age,speaker";
    int age_bin_width = 2;
  };
  auto a = std::make_shared<Args>();
  cmd->add_option("--corpus", a->corpus)->required();
  cmd->add_option("--alignment", a->alignment)->required();
  cmd->add_option("--by", a->by)->capture_default_str();
  cmd->add_option("--age-bin-width", a->age_bin_width)->capture_default_str();
  cmd->add_option("--cite", a->cite, "Further artifacts (fits.json, ...) to check and cite");
  cmd->add_option("--out", a->out, "report.csv")->required();
  cmd->callback([a, &g] {
    Provenance prov("report", g);
    const Corpus corpus = load_corpus_dir(a->corpus, prov);
    prov.input(a->alignment);
    for (const auto& c : a->cite) prov.input(c);
    const auto records = read_alignment_jsonl(a->alignment);
    const auto keys = parse_keys(a->by);
    const auto rows = summarize(records, corpus, keys, a->age_bin_width);
    const Manifest m = prov.finish(json{{"by", a->by}, {"age_bin_width_months", a->age_bin_width}}, std::nullopt);
    write_csv_artifact(a->out, m, summary_csv(keys, rows));
    std::cout << "wrote " << rows.size() << " rows to " << a->out.string() << "\n";
  });
}

}  // namespace align::cli
