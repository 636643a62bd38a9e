#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "align/alignment.hpp"
#include "align/corpus.hpp"
#include "align/embedding.hpp"

namespace align {

// ---------------------------------------------------------------------------
// Stratified sampling

struct SamplerConfig {
  int n_score_bins = 5;
  int per_bin_cap = 80;
  int per_activity_min = 10;
  int per_location_min = 10;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SampledPair {
  std::string utterance_id;
  std::string frame_id;  // the utterance's argmax frame
  int bin = 0;
  double score = 0.0;
  bool top_up = false;  // added by the label top-up phase

  bool operator==(const SampledPair&) const = default;
};

struct SampleReport {
  std::vector<SampledPair> pairs;  // sorted by (bin, utterance_id)
  double bin_lo = 0.0;
  double bin_hi = 0.0;
  std::vector<std::size_t> bin_pool;  // candidates per score bin
  std::vector<std::size_t> bin_phase1;  // taken per bin in the first phase
  std::map<std::string, std::size_t> activity_counts;
  std::map<std::string, std::size_t> location_counts;
};

/// Two-phase sampling: up to `per_bin_cap` pairs per equal-width score bin
/// over the observed [min, max], then label top-ups until every activity and
/// location has its minimum or its pool is exhausted. The cap bounds the
/// first phase only; top-up pairs are marked. Throws EmptyPool.
SampleReport stratified_sample(std::span<const AlignmentRecord> records, const Corpus& corpus,
                               const SamplerConfig& config);

/// Equal-width bin of `score` over [lo, hi]; the top edge falls in the last bin.
int score_bin(double score, double lo, double hi, int n_bins) noexcept;

// ---------------------------------------------------------------------------
// 4AFC trials

enum class Condition { Image, Utterance };

std::string_view to_string(Condition condition);
Condition parse_condition(std::string_view name);

struct CatchPayload {
  std::string question;
  std::array<std::string, 4> options;
  int answer_index = 0;

  bool operator==(const CatchPayload&) const = default;
};

/// Option 0 is the target, options 1..3 the distractors in draw order.
/// presented_order[position] is the option shown at that screen position.
struct Trial {
  std::string trial_id;
  Condition condition = Condition::Image;
  std::string target_utterance_id;
  std::string target_frame_id;
  std::array<std::string, 3> distractor_ids;
  std::array<int, 4> presented_order{0, 1, 2, 3};
  bool is_catch = false;
  std::optional<CatchPayload> catch_payload;

  /// Option index that counts as correct (0, or the catch answer).
  int correct_option() const noexcept;
  /// Screen position of the correct option.
  int correct_position() const noexcept;
  bool is_correct(int choice_index) const noexcept;
  /// Candidate id shown at a screen position (frame or utterance id, or the
  /// catch option text).
  const std::string& option_at(int position) const;

  bool operator==(const Trial&) const = default;
};

/// One trial per pair; distractors are the ids of three other sampled pairs
/// (frames in the image condition, utterances in the utterance condition).
/// Throws InsufficientPool when fewer than 4 distinct candidates exist.
std::vector<Trial> generate_trials(std::span<const SampledPair> pairs, Condition condition,
                                   std::uint64_t seed);

/// Bundled closed-vocabulary catch questions.
std::span<const CatchPayload> default_catch_bank();

// ---------------------------------------------------------------------------
// Model 4AFC

struct ModelChoice {
  std::string trial_id;
  std::array<double, 4> scores{};  // presented order
  std::array<double, 4> probs{};
  int chosen_index = 0;
  bool correct = false;
};

std::array<double, 4> softmax4(const std::array<double, 4>& scores, double temperature);

ModelChoice model_4afc(const Trial& trial, const EmbeddingStore& text_store,
                       const EmbeddingStore& image_store, double temperature = 1.0);

// ---------------------------------------------------------------------------
// Assignment

struct StudyConfig {
  int trials_per_annotator_target = 110;
  int catch_trials_per_annotator = 5;
  int max_catch_failures = 1;
  int annotations_per_trial_target = 6;

  void validate() const;
};

struct AnnotatorSlot {
  int slot = 0;
  Condition condition = Condition::Image;
  std::vector<std::string> items;  // test and catch trial ids, in presentation order
  std::size_t n_test = 0;
};

struct Assignment {
  std::uint64_t seed = 0;
  std::vector<AnnotatorSlot> slots;
  std::vector<Trial> catch_trials;
  std::map<std::string, double> mean_test_per_annotator;  // per condition
  double target_slack = 0.0;  // mean test trials per annotator minus target

  const Trial* find_catch(std::string_view id) const;
};

/// Annotators alternate between the conditions present in `trials`; within a
/// condition every trial goes to exactly annotations_per_trial_target
/// annotators and test loads differ by at most one. Throws
/// InfeasibleAssignment when a condition has fewer annotators than the
/// per-trial target.
Assignment assign_trials(std::span<const Trial> trials, int n_annotators,
                         const StudyConfig& config, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Responses

struct Response {
  std::string response_id;
  std::string annotator_id;
  std::string trial_id;
  int choice_index = 0;
  bool correct = false;
  bool is_catch = false;
  std::optional<std::int64_t> rt_ms;
  std::string received_at;

  bool operator==(const Response&) const = default;
};

struct ExclusionResult {
  std::vector<std::string> kept_annotators;
  std::vector<std::string> excluded_annotators;
  std::map<std::string, int> catch_failures;
};

/// An annotator is excluded iff their catch failures exceed max_catch_failures.
ExclusionResult apply_exclusions(std::span<const Response> responses, const StudyConfig& config);

/// Responses from kept annotators only.
std::vector<Response> filter_kept(std::span<const Response> responses,
                                  const ExclusionResult& exclusions);

struct AccuracyRow {
  std::string trial_id;
  Condition condition = Condition::Image;
  std::string utterance_id;
  double clip_score = 0.0;
  int n = 0;
  int k = 0;
  double accuracy = 0.0;
};

struct AccuracyTable {
  std::vector<AccuracyRow> rows;  // trial order
  std::vector<std::string> uncovered_trials;  // no responses
};

/// Joins test responses to trials and to their target utterance's max_score.
/// Catch responses are ignored. Throws OrphanResponse for unknown trial ids.
AccuracyTable accuracy_table(std::span<const Response> responses, std::span<const Trial> trials,
                             std::span<const AlignmentRecord> records);

// ---------------------------------------------------------------------------
// Simulated annotators

/// Accuracy curve p(s) = floor + (1 - floor) * logistic(b0 + b1 * s).
struct AccuracyCurve {
  double b0 = -4.625;
  double b1 = 18.5;
  double floor = 0.0;

  double operator()(double score) const noexcept;
};

struct SimulationConfig {
  AccuracyCurve curve;
  double catch_accuracy = 1.0;
  /// Slots whose annotators answer catch trials at `inattentive_catch_accuracy`.
  std::vector<int> inattentive_slots;
  double inattentive_catch_accuracy = 0.2;
  std::uint64_t seed = 0;
};

/// One response per assigned item. Annotator ids are "sim-<slot>".
std::vector<Response> simulate_annotators(const Assignment& assignment,
                                          std::span<const Trial> trials,
                                          std::span<const AlignmentRecord> records,
                                          const SimulationConfig& config);

// ---------------------------------------------------------------------------
// Serialization

void write_trials_jsonl(std::ostream& out, std::span<const Trial> trials);
std::vector<Trial> read_trials_jsonl(const std::filesystem::path& path);

nlohmann::json response_to_json(const Response& response);
/// Accepts a bare response or a service log line {"sequence",...,"response":{...}}.
Response response_from_json(const nlohmann::json& j);

void write_responses_jsonl(std::ostream& out, std::span<const Response> responses);
std::vector<Response> read_responses_jsonl(const std::filesystem::path& path);

nlohmann::json assignment_to_json(const Assignment& assignment);
Assignment assignment_from_json(const nlohmann::json& j);

nlohmann::json trial_to_json(const Trial& trial);
Trial trial_from_json(const nlohmann::json& j);

void write_pairs_jsonl(std::ostream& out, std::span<const SampledPair> pairs);
std::vector<SampledPair> read_pairs_jsonl(const std::filesystem::path& path);

}  // namespace align
