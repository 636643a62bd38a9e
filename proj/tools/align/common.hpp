#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "align/corpus.hpp"
#include "align/io.hpp"

namespace align::cli {

namespace fs = std::filesystem;

struct Globals {
  bool force = false;
  bool no_timestamp = false;
  unsigned threads = 1;
};

/// Collects input hashes and upstream manifests for one subcommand run and
/// produces the manifest of its outputs.
class Provenance {
 public:
  Provenance(std::string subcommand, const Globals& globals);

  void input(const fs::path& path);
  /// Lineage-checked manifest; throws LineageError unless --force.
  Manifest finish(json config, std::optional<std::uint64_t> seed) const;

 private:
  std::string subcommand_;
  const Globals& globals_;
  std::map<std::string, std::string> hashes_;
  std::map<std::string, json> upstream_;
};

/// Loads transcripts.jsonl, frames.jsonl and sessions.jsonl from `dir`,
/// registering all three as inputs.
Corpus load_corpus_dir(const fs::path& dir, Provenance& provenance, const LoadOptions& options = {});

void write_jsonl_artifact(const fs::path& path, const Manifest& manifest, std::string_view body);
/// JSON document with the manifest under "manifest".
void write_json_artifact(const fs::path& path, const Manifest& manifest, json document);
void write_csv_artifact(const fs::path& path, const Manifest& manifest, std::string_view body);
/// EMB1 files carry their manifest in a `<file>.manifest.json` sidecar.
void write_sidecar(const fs::path& path, const Manifest& manifest);

json read_json_file(const fs::path& path);

std::vector<std::string> split_list(const std::string& s);

/// CLI11 config reader for JSON files: top-level keys are options, nested
/// objects are subcommand sections.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool write_description,
                        std::string prefix) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

}  // namespace align::cli
