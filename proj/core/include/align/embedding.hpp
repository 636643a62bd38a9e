#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace align {

enum class EmbeddingKind { Image, Text };

std::string_view to_string(EmbeddingKind kind);
EmbeddingKind parse_embedding_kind(std::string_view name);

/// Unit-norm embedding. Values are held in double precision; the EMB1 file
/// format stores float32.
class EmbeddingVector {
 public:
  EmbeddingVector() = default;
  explicit EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {}

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double norm() const noexcept;

  bool operator==(const EmbeddingVector&) const = default;

 private:
  std::vector<double> values_;
};

inline constexpr double kNormTolerance = 1e-3;

/// Returns `values` scaled to unit norm when its norm is within
/// kNormTolerance of 1; throws NormError naming `id` otherwise.
EmbeddingVector checked_unit(std::string_view id, std::vector<double> values,
                             double tolerance = kNormTolerance);

class EmbeddingStore {
 public:
  EmbeddingStore(EmbeddingKind kind, std::size_t dim) : kind_(kind), dim_(dim) {}

  EmbeddingKind kind() const noexcept { return kind_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return vectors_.size(); }

  /// Throws DimMismatch on wrong dimension, IntegrityError on duplicate id.
  void insert(std::string id, EmbeddingVector vector);

  const EmbeddingVector* find(std::string_view id) const;
  bool contains(std::string_view id) const { return find(id) != nullptr; }

  /// Ids in ascending byte order.
  std::vector<std::string> ids() const;

  bool operator==(const EmbeddingStore& other) const {
    return kind_ == other.kind_ && dim_ == other.dim_ && vectors_ == other.vectors_;
  }

 private:
  EmbeddingKind kind_;
  std::size_t dim_;
  std::unordered_map<std::string, EmbeddingVector> vectors_;
};

/// EMB1 reader: `EMB1 {"kind","dim","count"}\n` then per record a u16 LE id
/// length, the id bytes, and `dim` LE float32 values.
EmbeddingStore load_embeddings(const std::filesystem::path& path, EmbeddingKind expected_kind);
void write_embeddings(const EmbeddingStore& store, const std::filesystem::path& path);

struct EmbedItem {
  std::string id;
  std::string payload;  // raw utterance text, or an image reference
};

enum class ProviderMode { File, Remote, Fixture };

struct ProviderConfig {
  ProviderMode mode = ProviderMode::Fixture;
  std::optional<std::string> endpoint;  // http://host:port
  std::optional<std::uint64_t> fixture_seed;
  std::optional<std::filesystem::path> file_path;
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds request_timeout{30000};
  std::size_t batch_size = 256;
  std::size_t max_parallel_requests = 4;

  /// Throws ConfigError unless endpoint is set exactly when mode is Remote.
  void validate() const;
};

/// POST {endpoint}/embed in batches; each batch is retried with exponential
/// backoff up to `max_attempts` times. Vectors are renormalized to unit norm.
EmbeddingStore fetch_remote(const ProviderConfig& config, EmbeddingKind kind,
                            std::span<const EmbedItem> items);

/// Deterministic embeddings for tests and synthetic corpora.
///
/// The base vector of an id is drawn from a generator seeded by
/// hash(id, seed): isotropic Gaussian coordinates, normalized. With a nonzero
/// `shared_weight` a, every base vector is a*g + sqrt(1-a^2)*n, where g is a
/// seed-level common direction, which gives unrelated pairs a mean cosine near
/// a^2 (as real contrastive encoders do).
///
/// plant(frame, utterance, c) pins the frame's vector to
/// c*u + sqrt(1-c^2)*w, where u is the utterance vector and w is the frame's
/// base vector orthogonalized against u.
class FixtureProvider {
 public:
  FixtureProvider(std::uint64_t seed, std::size_t dim, double shared_weight = 0.0);

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t dim() const noexcept { return dim_; }

  EmbeddingVector base_vector(std::string_view id) const;

  /// Throws RangeError if cosine is outside [-1, 1].
  void plant(std::string frame_id, std::string utterance_id, double cosine);

  EmbeddingVector text_vector(std::string_view utterance_id) const;
  EmbeddingVector image_vector(std::string_view frame_id) const;

  EmbeddingStore build(EmbeddingKind kind, std::span<const std::string> ids) const;

 private:
  struct Plant {
    std::string utterance_id;
    double cosine;
  };

  std::uint64_t seed_;
  std::size_t dim_;
  double shared_weight_;
  std::vector<double> shared_direction_;
  std::map<std::string, Plant, std::less<>> plants_;
};

FixtureProvider fixture_provider(std::uint64_t seed, std::size_t dim);

}  // namespace align
