#include "align/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "align/error.hpp"

namespace align {

json Manifest::to_json() const {
  json j;
  j["tool"] = tool;
  j["subcommand"] = subcommand;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["config"] = config;
  j["inputs"] = inputs;
  if (!upstream.empty()) j["upstream"] = upstream;
  if (created_at) j["created_at"] = *created_at;
  return j;
}

Manifest Manifest::from_json(const json& j) {
  Manifest m;
  m.tool = j.value("tool", "align");
  m.subcommand = j.value("subcommand", "");
  if (j.contains("seed") && !j["seed"].is_null()) m.seed = j["seed"].get<std::uint64_t>();
  m.config = j.value("config", json::object());
  if (j.contains("inputs")) m.inputs = j["inputs"].get<std::map<std::string, std::string>>();
  if (j.contains("upstream")) m.upstream = j["upstream"].get<std::map<std::string, json>>();
  if (j.contains("created_at")) m.created_at = j["created_at"].get<std::string>();
  return m;
}

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int len = 0;
  EVP_Digest(bytes.data(), bytes.size(), digest.data(), &len, EVP_sha256(), nullptr);
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i) {
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return out.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("short write to " + path.string());
}

std::optional<Manifest> read_jsonl(const std::filesystem::path& path,
                                   const std::function<void(const json&, std::size_t)>& visit) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::optional<Manifest> manifest;
  std::string line;
  std::size_t line_no = 0;
  bool first_record = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.filename().string() + ":" + std::to_string(line_no) +
                       ": malformed JSON (" + e.what() + ")");
    }
    if (!j.is_object()) {
      throw ParseError(path.filename().string() + ":" + std::to_string(line_no) +
                       ": expected a JSON object");
    }
    if (first_record && j.contains(kManifestKey)) {
      manifest = Manifest::from_json(j[std::string(kManifestKey)]);
      first_record = false;
      continue;
    }
    first_record = false;
    visit(j, line_no);
  }
  return manifest;
}

std::string manifest_line(const Manifest& manifest) {
  json j;
  j[std::string(kManifestKey)] = manifest.to_json();
  return j.dump() + "\n";
}

std::optional<Manifest> read_manifest(const std::filesystem::path& path) {
  auto sidecar = path;
  sidecar += ".manifest.json";
  if (std::filesystem::exists(sidecar)) {
    return Manifest::from_json(json::parse(read_file(sidecar)));
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::string first;
  std::getline(in, first);
  static constexpr std::string_view kCsvPrefix = "# manifest: ";
  if (first.rfind(kCsvPrefix, 0) == 0) {
    return Manifest::from_json(json::parse(first.substr(kCsvPrefix.size())));
  }
  auto j = json::parse(first, nullptr, false);
  if (!j.is_discarded() && j.is_object() && j.contains(kManifestKey)) {
    return Manifest::from_json(j[std::string(kManifestKey)]);
  }
  // Whole-document JSON with a "manifest" key.
  in.clear();
  in.seekg(0);
  std::ostringstream buf;
  buf << in.rdbuf();
  auto doc = json::parse(buf.str(), nullptr, false);
  if (!doc.is_discarded() && doc.is_object() && doc.contains("manifest")) {
    return Manifest::from_json(doc["manifest"]);
  }
  return std::nullopt;
}

void check_lineage(const std::map<std::string, std::string>& input_hashes,
                   const std::map<std::string, json>& input_manifests) {
  std::map<std::string, std::pair<std::string, std::string>> by_name;  // filename -> (path, hash)
  for (const auto& [path, hash] : input_hashes) {
    by_name[std::filesystem::path(path).filename().string()] = {path, hash};
  }
  for (const auto& [path, manifest_json] : input_manifests) {
    const Manifest m = Manifest::from_json(manifest_json);
    for (const auto& [upstream_path, upstream_hash] : m.inputs) {
      const auto name = std::filesystem::path(upstream_path).filename().string();
      auto it = by_name.find(name);
      if (it == by_name.end() || it->second.first == path) continue;
      if (it->second.second != upstream_hash) {
        throw LineageError(path + " was produced from a different " + name + " (recorded sha256 " +
                           upstream_hash.substr(0, 12) + ", given " +
                           it->second.second.substr(0, 12) + "); pass --force to override");
      }
    }
  }
}

}  // namespace align
