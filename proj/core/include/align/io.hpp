#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace align {

using json = nlohmann::json;

/// Provenance block written at the head of every artifact.
struct Manifest {
  std::string tool = "align";
  std::string subcommand;
  std::optional<std::uint64_t> seed;
  json config = json::object();
  std::map<std::string, std::string> inputs;  // path -> sha256
  std::map<std::string, json> upstream;       // path -> that input's manifest
  std::optional<std::string> created_at;

  json to_json() const;
  static Manifest from_json(const json& j);
};

inline constexpr std::string_view kManifestKey = "_manifest";

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::string utc_timestamp();

/// Reads a JSON Lines file, skipping blank lines and a leading manifest line.
/// `visit` receives each object and its 1-based line number. Throws
/// ParseError with the line number on malformed JSON.
std::optional<Manifest> read_jsonl(const std::filesystem::path& path,
                                   const std::function<void(const json&, std::size_t)>& visit);

/// Manifest of an artifact: the first JSONL line, the "manifest" key of a
/// JSON document, a `# manifest:` CSV comment, or an EMB1 sidecar.
std::optional<Manifest> read_manifest(const std::filesystem::path& path);

std::string manifest_line(const Manifest& manifest);  // JSONL first line, with newline

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// Throws LineageError when an input's manifest records an upstream input
/// with the same file name as another current input but a different hash.
void check_lineage(const std::map<std::string, std::string>& input_hashes,
                   const std::map<std::string, json>& input_manifests);

}  // namespace align
