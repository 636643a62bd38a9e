#include "align/embedding.hpp"

#include <httplib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <future>
#include <set>
#include <thread>

#include "align/error.hpp"
#include "align/io.hpp"
#include "align/rng.hpp"

namespace align {

std::string_view to_string(EmbeddingKind kind) {
  return kind == EmbeddingKind::Image ? "image" : "text";
}

EmbeddingKind parse_embedding_kind(std::string_view name) {
  if (name == "image") return EmbeddingKind::Image;
  if (name == "text") return EmbeddingKind::Text;
  throw ConfigError("unknown embedding kind '" + std::string(name) + "'");
}

namespace {

long double sum_squares(std::span<const double> v) {
  long double acc = 0.0L;
  for (double x : v) acc += static_cast<long double>(x) * x;
  return acc;
}

std::vector<double> normalized(std::vector<double> values) {
  const long double n = std::sqrt(sum_squares(values));
  for (double& x : values) x = static_cast<double>(static_cast<long double>(x) / n);
  return values;
}

}  // namespace

double EmbeddingVector::norm() const noexcept {
  return static_cast<double>(std::sqrt(sum_squares(values_)));
}

EmbeddingVector checked_unit(std::string_view id, std::vector<double> values, double tolerance) {
  const double n = static_cast<double>(std::sqrt(sum_squares(values)));
  if (!(std::abs(n - 1.0) <= tolerance)) {
    throw NormError("vector '" + std::string(id) + "' has norm " + std::to_string(n) +
                    ", outside 1 +/- " + std::to_string(tolerance));
  }
  return EmbeddingVector(normalized(std::move(values)));
}

void EmbeddingStore::insert(std::string id, EmbeddingVector vector) {
  if (vector.dim() != dim_) {
    throw DimMismatch("vector '" + id + "' has dim " + std::to_string(vector.dim()) +
                      ", store dim is " + std::to_string(dim_));
  }
  auto [it, inserted] = vectors_.emplace(std::move(id), std::move(vector));
  if (!inserted) throw IntegrityError("duplicate embedding id '" + it->first + "'");
}

const EmbeddingVector* EmbeddingStore::find(std::string_view id) const {
  auto it = vectors_.find(std::string(id));
  return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<std::string> EmbeddingStore::ids() const {
  std::vector<std::string> out;
  out.reserve(vectors_.size());
  for (const auto& [id, _] : vectors_) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

// ---------------------------------------------------------------------------
// EMB1

namespace {

constexpr std::string_view kMagic = "EMB1 ";

float read_f32_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

void write_f32_le(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

}  // namespace

EmbeddingStore load_embeddings(const std::filesystem::path& path, EmbeddingKind expected_kind) {
  const std::string bytes = read_file(path);
  const std::string name = path.filename().string();
  const auto newline = bytes.find('\n');
  if (bytes.rfind(kMagic, 0) != 0 || newline == std::string::npos) {
    throw FormatError(name + ": missing EMB1 header");
  }
  json header = json::parse(bytes.substr(kMagic.size(), newline - kMagic.size()), nullptr, false);
  if (header.is_discarded() || !header.is_object() || !header.contains("kind") ||
      !header.contains("dim") || !header.contains("count") || !header["kind"].is_string() ||
      !header["dim"].is_number_unsigned() || !header["count"].is_number_unsigned()) {
    throw FormatError(name + ": malformed EMB1 header");
  }
  EmbeddingKind kind;
  try {
    kind = parse_embedding_kind(header["kind"].get<std::string>());
  } catch (const ConfigError&) {
    throw FormatError(name + ": unknown kind in EMB1 header");
  }
  if (kind != expected_kind) {
    throw FormatError(name + ": file holds " + std::string(to_string(kind)) +
                      " embeddings, expected " + std::string(to_string(expected_kind)));
  }
  const auto dim = header["dim"].get<std::size_t>();
  const auto count = header["count"].get<std::size_t>();
  if (dim == 0) throw FormatError(name + ": dim must be positive");

  EmbeddingStore store(kind, dim);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data()) + newline + 1;
  const auto* end = reinterpret_cast<const unsigned char*>(bytes.data()) + bytes.size();
  for (std::size_t row = 0; row < count; ++row) {
    if (end - p < 2) {
      throw FormatError(name + ": header count " + std::to_string(count) + ", body has " +
                        std::to_string(row) + " rows");
    }
    const std::size_t id_len = static_cast<std::size_t>(p[0]) | (static_cast<std::size_t>(p[1]) << 8);
    p += 2;
    if (static_cast<std::size_t>(end - p) < id_len + 4 * dim) {
      throw FormatError(name + ": header count " + std::to_string(count) + ", body has " +
                        std::to_string(row) + " complete rows");
    }
    std::string id(reinterpret_cast<const char*>(p), id_len);
    p += id_len;
    std::vector<double> values(dim);
    for (std::size_t k = 0; k < dim; ++k, p += 4) values[k] = read_f32_le(p);
    store.insert(id, checked_unit(id, std::move(values)));
  }
  if (p != end) {
    throw FormatError(name + ": " + std::to_string(end - p) + " trailing bytes after " +
                      std::to_string(count) + " rows");
  }
  return store;
}

void write_embeddings(const EmbeddingStore& store, const std::filesystem::path& path) {
  json header{{"kind", to_string(store.kind())}, {"dim", store.dim()}, {"count", store.size()}};
  std::string out(kMagic);
  out += header.dump();
  out.push_back('\n');
  for (const auto& id : store.ids()) {
    if (id.size() > 0xffff) throw FormatError("id longer than 65535 bytes: " + id.substr(0, 32));
    out.push_back(static_cast<char>(id.size() & 0xff));
    out.push_back(static_cast<char>((id.size() >> 8) & 0xff));
    out += id;
    for (double v : store.find(id)->values()) write_f32_le(out, static_cast<float>(v));
  }
  write_file(path, out);
}

// ---------------------------------------------------------------------------
// Remote provider

void ProviderConfig::validate() const {
  if ((mode == ProviderMode::Remote) != endpoint.has_value()) {
    throw ConfigError("endpoint is required iff provider mode is remote");
  }
  if (mode == ProviderMode::File && !file_path) throw ConfigError("file mode requires a path");
  if (max_attempts < 1 || max_attempts > 5) throw ConfigError("max_attempts must be in [1, 5]");
  if (batch_size == 0 || max_parallel_requests == 0) {
    throw ConfigError("batch_size and max_parallel_requests must be positive");
  }
}

namespace {

struct BatchResult {
  std::size_t dim = 0;
  std::vector<std::pair<std::string, std::vector<double>>> vectors;
};

BatchResult post_batch(const ProviderConfig& config, EmbeddingKind kind,
                       std::span<const EmbedItem> batch) {
  json body{{"kind", to_string(kind)}, {"items", json::array()}};
  for (const auto& item : batch) body["items"].push_back({{"id", item.id}, {"payload", item.payload}});
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 0; attempt < config.max_attempts; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(config.initial_backoff * (1 << (attempt - 1)));
    httplib::Client client(*config.endpoint);
    client.set_connection_timeout(config.request_timeout);
    client.set_read_timeout(config.request_timeout);
    auto res = client.Post("/embed", payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500 || res->status == 429 || res->status == 408) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ProtocolError("embedding service answered HTTP " + std::to_string(res->status));
    }
    json reply = json::parse(res->body, nullptr, false);
    if (reply.is_discarded() || !reply.contains("dim") || !reply.contains("vectors") ||
        !reply["vectors"].is_array()) {
      throw ProtocolError("malformed embedding service response");
    }
    BatchResult result;
    result.dim = reply["dim"].get<std::size_t>();
    for (const auto& v : reply["vectors"]) {
      result.vectors.emplace_back(v.at("id").get<std::string>(),
                                  v.at("values").get<std::vector<double>>());
    }
    return result;
  }
  throw TransportError("embedding service unreachable after " +
                       std::to_string(config.max_attempts) + " attempts: " + last_error);
}

}  // namespace

EmbeddingStore fetch_remote(const ProviderConfig& config, EmbeddingKind kind,
                            std::span<const EmbedItem> items) {
  config.validate();
  if (config.mode != ProviderMode::Remote) throw ConfigError("fetch_remote requires remote mode");

  std::vector<std::span<const EmbedItem>> batches;
  for (std::size_t i = 0; i < items.size(); i += config.batch_size) {
    batches.push_back(items.subspan(i, std::min(config.batch_size, items.size() - i)));
  }
  std::vector<BatchResult> results(batches.size());
  for (std::size_t start = 0; start < batches.size(); start += config.max_parallel_requests) {
    const std::size_t stop = std::min(batches.size(), start + config.max_parallel_requests);
    std::vector<std::future<BatchResult>> inflight;
    for (std::size_t b = start; b < stop; ++b) {
      inflight.push_back(std::async(std::launch::async, post_batch, std::cref(config), kind,
                                    batches[b]));
    }
    for (std::size_t b = start; b < stop; ++b) results[b] = inflight[b - start].get();
  }

  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> merged;
  for (auto& r : results) {
    if (dim == 0) dim = r.dim;
    if (r.dim != dim) throw DimMismatch("embedding service changed dim between batches");
    for (auto& [id, values] : r.vectors) merged[id] = std::move(values);
  }
  std::vector<std::string> missing;
  for (const auto& item : items) {
    if (!merged.contains(item.id)) missing.push_back(item.id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw ProtocolError("embedding service response is missing ids: " + list);
  }
  EmbeddingStore store(kind, dim);
  for (const auto& item : items) {
    auto values = std::move(merged[item.id]);
    if (values.size() != dim) {
      throw DimMismatch("vector '" + item.id + "' has dim " + std::to_string(values.size()));
    }
    if (sum_squares(values) == 0.0L) throw NormError("vector '" + item.id + "' is zero");
    if (!store.contains(item.id)) store.insert(item.id, EmbeddingVector(normalized(std::move(values))));
  }
  return store;
}

// ---------------------------------------------------------------------------
// Fixture provider

namespace {

std::vector<double> gaussian_unit(std::uint64_t stream_seed, std::size_t dim) {
  Rng rng(stream_seed);
  std::vector<double> v(dim);
  for (double& x : v) x = rng.normal();
  return normalized(std::move(v));
}

long double dot(std::span<const double> a, std::span<const double> b) {
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<long double>(a[i]) * b[i];
  return acc;
}

constexpr std::string_view kTextPrefix = "text\x1f";
constexpr std::string_view kImagePrefix = "image\x1f";

}  // namespace

FixtureProvider::FixtureProvider(std::uint64_t seed, std::size_t dim, double shared_weight)
    : seed_(seed), dim_(dim), shared_weight_(shared_weight) {
  if (dim < 2) throw RangeError("fixture provider requires dim >= 2");
  if (!(shared_weight >= 0.0 && shared_weight < 1.0)) {
    throw RangeError("shared_weight must be in [0, 1)");
  }
  if (shared_weight_ > 0.0) shared_direction_ = gaussian_unit(derive_seed(seed, 0x5eed), dim);
}

EmbeddingVector FixtureProvider::base_vector(std::string_view id) const {
  auto v = gaussian_unit(hash_id(id, seed_), dim_);
  if (shared_weight_ > 0.0) {
    const double a = shared_weight_;
    const double b = std::sqrt(1.0 - a * a);
    for (std::size_t i = 0; i < dim_; ++i) v[i] = a * shared_direction_[i] + b * v[i];
    v = normalized(std::move(v));
  }
  return EmbeddingVector(std::move(v));
}

void FixtureProvider::plant(std::string frame_id, std::string utterance_id, double cosine) {
  if (!(cosine >= -1.0 && cosine <= 1.0)) {
    throw RangeError("planted cosine " + std::to_string(cosine) + " is outside [-1, 1]");
  }
  plants_[std::move(frame_id)] = Plant{std::move(utterance_id), cosine};
}

EmbeddingVector FixtureProvider::text_vector(std::string_view utterance_id) const {
  return base_vector(std::string(kTextPrefix) + std::string(utterance_id));
}

EmbeddingVector FixtureProvider::image_vector(std::string_view frame_id) const {
  auto base = base_vector(std::string(kImagePrefix) + std::string(frame_id));
  auto it = plants_.find(frame_id);
  if (it == plants_.end()) return base;

  const auto u = text_vector(it->second.utterance_id);
  const auto uv = u.values();
  std::vector<double> w(base.values().begin(), base.values().end());
  for (int pass = 0; pass < 2; ++pass) {
    const long double p = dot(w, uv);
    for (std::size_t i = 0; i < dim_; ++i) {
      w[i] = static_cast<double>(static_cast<long double>(w[i]) - p * uv[i]);
    }
  }
  w = normalized(std::move(w));
  const long double c = it->second.cosine;
  const long double s = std::sqrt(1.0L - c * c);
  std::vector<double> v(dim_);
  for (std::size_t i = 0; i < dim_; ++i) v[i] = static_cast<double>(c * uv[i] + s * w[i]);
  return EmbeddingVector(std::move(v));
}

EmbeddingStore FixtureProvider::build(EmbeddingKind kind, std::span<const std::string> ids) const {
  EmbeddingStore store(kind, dim_);
  std::set<std::string_view> seen;
  for (const auto& id : ids) {
    if (!seen.insert(id).second) continue;
    store.insert(id, kind == EmbeddingKind::Text ? text_vector(id) : image_vector(id));
  }
  return store;
}

FixtureProvider fixture_provider(std::uint64_t seed, std::size_t dim) {
  return FixtureProvider(seed, dim);
}

}  // namespace align
