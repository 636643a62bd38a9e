#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "align/corpus.hpp"
#include "align/embedding.hpp"

namespace align {

struct AnalysisConfig {
  double tau = 0.24;
  int fps = 1;

  void validate() const;  // tau in (0, 1), fps == 1
};

struct FrameScore {
  std::string frame_id;
  double score = 0.0;

  bool operator==(const FrameScore&) const = default;
};

struct AlignmentRecord {
  std::string utterance_id;
  std::vector<FrameScore> frame_scores;  // ascending frame t_s
  double max_score = 0.0;
  std::string argmax_frame;
  bool is_high = false;
  std::size_t n_frames = 0;  // equals frame_scores.size() unless read without per-frame data

  bool operator==(const AlignmentRecord&) const = default;
};

struct EmbeddingStores {
  const EmbeddingStore& text;
  const EmbeddingStore& image;
};

/// Dot product of two unit vectors, clamped to [-1, 1]. Throws DimMismatch.
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

/// Index of the first maximum; `scores` must be non-empty.
std::size_t argmax_first(std::span<const double> scores);

/// Throws MissingFrames when no frame is concurrent and MissingEmbedding
/// (naming the id) when a text or image vector is absent.
AlignmentRecord score_utterance(const Corpus& corpus, const EmbeddingStores& stores,
                                const AnalysisConfig& config, const Utterance& utterance);

struct SkippedUtterance {
  std::string utterance_id;
  std::string reason;  // "MissingFrames" | "MissingEmbedding"
  std::string detail;
};

struct ScoreResult {
  std::vector<AlignmentRecord> records;  // corpus utterance order
  std::vector<SkippedUtterance> skipped;
};

/// Scores every utterance passing `speaker_filter`. Utterances that cannot
/// be scored are reported in `skipped` instead of failing the run. Output is
/// independent of `threads`.
ScoreResult score_corpus(const Corpus& corpus, const EmbeddingStores& stores,
                         const AnalysisConfig& config,
                         std::optional<Speaker> speaker_filter = std::nullopt,
                         unsigned threads = 1);

enum class GroupKey { Child, AgeBin, Speaker, Session };

GroupKey parse_group_key(std::string_view name);
std::string_view to_string(GroupKey key);

struct SummaryRow {
  std::optional<std::string> child_id;
  std::optional<int> age_bin_months;  // lower edge of [k*w, (k+1)*w)
  std::optional<Speaker> speaker;
  std::optional<std::string> session_id;
  std::size_t n_utterances = 0;
  std::size_t n_high = 0;
  double prop_high = 0.0;
  double mean_score = 0.0;
};

/// Grouped proportions of high-alignment utterances, rows sorted by key.
/// An empty `group_by` yields a single overall row. Throws EmptyGroupSet.
std::vector<SummaryRow> summarize(std::span<const AlignmentRecord> records, const Corpus& corpus,
                                  std::span<const GroupKey> group_by,
                                  int age_bin_width_months = 2);

void write_alignment_jsonl(std::ostream& out, std::span<const AlignmentRecord> records,
                           bool per_frame);
std::vector<AlignmentRecord> read_alignment_jsonl(const std::filesystem::path& path);

}  // namespace align
