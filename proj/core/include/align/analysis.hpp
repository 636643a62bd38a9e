#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "align/alignment.hpp"
#include "align/corpus.hpp"
#include "align/io.hpp"
#include "align/stats.hpp"
#include "align/study.hpp"

// Model pipelines shared by the CLI and the acceptance suite.
namespace align::analysis {

/// Mixed-effects substitution note carried by every clustered fit report.
inline constexpr std::string_view kClusterNote =
    "Linear mixed-effects models are replaced by OLS point estimates with percentile "
    "confidence intervals from a cluster (child) bootstrap; no REML fit or random-effects "
    "variance is estimated, so coefficients are comparable in sign and magnitude only.";

/// Condition coding in the validation model: image = 0, utterance = 1.
double condition_code(Condition condition) noexcept;

/// Per-trial binomial rows: y = k of n, covariates score, condition and
/// score:condition (the interaction is dropped when only one condition is
/// present).
stats::BinomialData validation_rows(std::span<const AccuracyRow> rows);

struct ConditionCurve {
  Condition condition = Condition::Image;
  std::optional<double> crossing_point;  // unset when the slope is degenerate
  std::vector<stats::BinSummary> deciles;  // accuracy by score decile
};

struct ValidationAnalysis {
  stats::GlmFit fit;
  std::vector<ConditionCurve> curves;
  /// Cross-condition correlation of per-pair accuracy, over utterances that
  /// have a trial in both conditions.
  std::optional<stats::Correlation> cross_condition;
  std::size_t n_trials = 0;
  std::size_t n_responses = 0;
};

ValidationAnalysis validation_analysis(std::span<const AccuracyRow> rows, int replicates,
                                       std::uint64_t seed);

/// Model 4AFC curve: accuracy of argmax choices by score decile.
std::vector<stats::BinSummary> model_curve(std::span<const double> scores,
                                           std::span<const double> correct, int replicates,
                                           std::uint64_t seed);

/// Rows (child, session, speaker class) with prop_high outcome, adult
/// indicator and session age; children are pooled KEY_CHILD + OTHER_CHILD and
/// UNKNOWN is dropped.
struct ClusteredRows {
  stats::RegressionData data;
  std::vector<std::string> clusters;
};

ClusteredRows speaker_rows(const Corpus& corpus, std::span<const AlignmentRecord> records);
/// Per-utterance rows: max_score on duration_s, age_months and their interaction.
ClusteredRows duration_rows(const Corpus& corpus, std::span<const AlignmentRecord> records);

stats::OlsFit fit_clustered(const ClusteredRows& rows, int replicates, std::uint64_t seed,
                            unsigned threads = 1);

json to_json(const stats::Estimate& e);
json to_json(const stats::GlmFit& fit);
json to_json(const stats::OlsFit& fit);
json to_json(const stats::PooledFit& fit);
json to_json(std::span<const stats::BinSummary> bins);
json to_json(const ValidationAnalysis& analysis);

}  // namespace align::analysis
