#include "common.hpp"

#include <sstream>

#include "align/error.hpp"
#include "align/text.hpp"

namespace align::cli {

Provenance::Provenance(std::string subcommand, const Globals& globals)
    : subcommand_(std::move(subcommand)), globals_(globals) {}

void Provenance::input(const fs::path& path) {
  if (!fs::exists(path)) throw IoError("input not found: " + path.string());
  const std::string key = path.lexically_normal().generic_string();
  hashes_[key] = sha256_file(path);
  if (auto m = read_manifest(path)) upstream_[key] = m->to_json();
}

Manifest Provenance::finish(json config, std::optional<std::uint64_t> seed) const {
  if (!globals_.force) check_lineage(hashes_, upstream_);
  Manifest m;
  m.subcommand = subcommand_;
  m.seed = seed;
  m.config = std::move(config);
  m.inputs = hashes_;
  m.upstream = upstream_;
  if (globals_.force) m.config["forced"] = true;
  if (!globals_.no_timestamp) m.created_at = utc_timestamp();
  return m;
}

Corpus load_corpus_dir(const fs::path& dir, Provenance& provenance, const LoadOptions& options) {
  const auto t = dir / "transcripts.jsonl", f = dir / "frames.jsonl", s = dir / "sessions.jsonl";
  provenance.input(t);
  provenance.input(f);
  provenance.input(s);
  return load_corpus(t, f, s, options);
}

namespace {

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

}  // namespace

void write_jsonl_artifact(const fs::path& path, const Manifest& manifest, std::string_view body) {
  ensure_parent(path);
  write_file(path, manifest_line(manifest) + std::string(body));
}

void write_json_artifact(const fs::path& path, const Manifest& manifest, json document) {
  ensure_parent(path);
  document["manifest"] = manifest.to_json();
  write_file(path, document.dump(2) + "\n");
}

void write_csv_artifact(const fs::path& path, const Manifest& manifest, std::string_view body) {
  ensure_parent(path);
  write_file(path, "# manifest: " + manifest.to_json().dump() + "\n" + std::string(body));
}

void write_sidecar(const fs::path& path, const Manifest& manifest) {
  auto sidecar = path;
  sidecar += ".manifest.json";
  write_file(sidecar, manifest.to_json().dump(2) + "\n");
}

json read_json_file(const fs::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ParseError(path.filename().string() + ": " + e.what());
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (const auto& part : text::split(s, ',')) {
    const auto t = text::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

std::string JsonConfig::to_config(const CLI::App* app, bool default_also, bool, std::string) const {
  json j = json::object();
  for (const CLI::Option* opt : app->get_options()) {
    if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
    const auto& name = opt->get_lnames().front();
    if (opt->count() > 0) {
      j[name] = opt->results().size() == 1 ? json(opt->results().front()) : json(opt->results());
    } else if (default_also && !opt->get_default_str().empty()) {
      j[name] = opt->get_default_str();
    }
  }
  return j.dump(2);
}

namespace {

void flatten(const json& j, std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
  for (const auto& [key, value] : j.items()) {
    if (value.is_object()) {
      parents.push_back(key);
      flatten(value, parents, out);
      parents.pop_back();
      continue;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(scalar(v));
    } else {
      item.inputs.push_back(scalar(value));
    }
    out.push_back(std::move(item));
  }
}

}  // namespace

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  json j;
  try {
    j = json::parse(input);
  } catch (const json::parse_error& e) {
    throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw CLI::ConversionError("config file must contain a JSON object");
  std::vector<CLI::ConfigItem> items;
  std::vector<std::string> parents;
  flatten(j, parents, items);
  return items;
}

}  // namespace align::cli
