#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "align/alignment.hpp"
#include "align/corpus.hpp"
#include "align/stats.hpp"

namespace align {

enum class LemmatizerMode { LookupTable, Identity, External };

/// Surface form -> lemma boundary.
///
/// lookup_table: a two-column CSV/TSV (`form,lemma`, header optional) with
/// lowercased keys; unknown forms fall back to identity.
/// external: a JSONL file of pre-lemmatized utterances,
/// {"utterance_id","lemmas":[...]}, produced by an external tool.
class Lemmatizer {
 public:
  static Lemmatizer identity();
  /// Both loaders throw TableLoadError.
  static Lemmatizer from_table(const std::filesystem::path& path);
  static Lemmatizer from_external(const std::filesystem::path& path);
  static Lemmatizer from_map(std::map<std::string, std::string, std::less<>> table);

  LemmatizerMode mode() const noexcept { return mode_; }
  std::string lemma(std::string_view form) const;
  const std::vector<std::string>* external_lemmas(std::string_view utterance_id) const;

 private:
  LemmatizerMode mode_ = LemmatizerMode::Identity;
  std::map<std::string, std::string, std::less<>> table_;
  std::map<std::string, std::vector<std::string>, std::less<>> external_;
};

using LemmaCounts = std::map<std::string, int>;
using LemmaMap = std::map<std::string, LemmaCounts>;  // utterance_id -> lemma multiset

/// Lowercases, strips punctuation, tokenizes, and maps every token.
LemmaMap lemmatize_corpus(const Corpus& corpus, const Lemmatizer& lemmatizer);

struct LemmaRecord {
  std::string lemma;
  int n_utterances = 0;
  double mean_clip = 0.0;
  double log_frequency = 0.0;
  std::optional<double> concreteness;
  std::optional<double> imageability;
  std::optional<double> sensorimotor_strength;
  std::optional<double> action_strength;

  bool operator==(const LemmaRecord&) const = default;
};

/// Per-lemma mean of max_score over the distinct scored utterances that
/// contain it; lemmas in fewer than `min_utterances` utterances are dropped.
/// log_frequency is the natural log of total token occurrences in `lemmas`.
std::vector<LemmaRecord> aggregate_lemmas(const LemmaMap& lemmas,
                                          std::span<const AlignmentRecord> records,
                                          int min_utterances = 10);

enum class NormField { Concreteness, Imageability, SensorimotorStrength, ActionStrength };

std::string_view to_string(NormField field);
NormField parse_norm_field(std::string_view name);

struct NormSource {
  NormField field;
  std::filesystem::path path;
};

struct MergeReport {
  std::vector<std::string> warnings;
  std::map<std::string, std::size_t> matched;  // field name -> matched lemmas
};

/// Left join of norm values on lowercased lemma. Duplicate rows: last wins,
/// with a warning. Empty or NA cells are missing. Throws CsvFormatError.
MergeReport merge_norms(std::vector<LemmaRecord>& records, std::span<const NormSource> sources);

struct LemmaRegressionOptions {
  stats::ImputationConfig imputation;
  bool standardize = false;
  std::size_t min_lemmas = 50;
};

struct LemmaRegression {
  stats::PooledFit pooled;
  std::vector<std::string> predictors;
  std::size_t n_lemmas = 0;
  std::map<std::string, std::size_t> missing_cells;
  bool standardized = false;
  std::string notes;
};

/// PMM imputation, per-imputation OLS of mean_clip on log frequency and the
/// four norms, then Rubin pooling.
LemmaRegression lemma_regression(std::span<const LemmaRecord> records,
                                 const LemmaRegressionOptions& options);

/// Predictor table for `records` (NaN where a norm is missing), including
/// the mean_clip outcome column.
stats::DataTable lemma_table(std::span<const LemmaRecord> records);

void write_lemmas_jsonl(std::ostream& out, std::span<const LemmaRecord> records);

}  // namespace align
