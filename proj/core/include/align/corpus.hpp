#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace align {

enum class Speaker { Adult, KeyChild, OtherChild, Unknown };
enum class LanguageFlag { MonolingualEnglish, Other };

std::string_view to_string(Speaker speaker);
std::optional<Speaker> parse_speaker_name(std::string_view name);
std::string_view to_string(LanguageFlag flag);

struct Session {
  std::string session_id;
  std::string child_id;
  double age_months = 0.0;
  double duration_s = 0.0;
  LanguageFlag language_flag = LanguageFlag::MonolingualEnglish;

  bool operator==(const Session&) const = default;
};

struct Utterance {
  std::string utterance_id;
  std::string session_id;
  double start_s = 0.0;
  double end_s = 0.0;
  Speaker speaker = Speaker::Unknown;
  std::string text;
  int token_count = 0;

  double duration_s() const noexcept { return end_s - start_s; }
  bool operator==(const Utterance&) const = default;
};

struct FrameRef {
  std::string frame_id;
  std::string session_id;
  std::int64_t t_s = 0;
  std::optional<std::string> activity;
  std::optional<std::string> location;

  bool operator==(const FrameRef&) const = default;
};

struct LabelVocab {
  std::set<std::string> activities;
  std::set<std::string> locations;

  bool operator==(const LabelVocab&) const = default;
};

/// Maps diarizer speaker labels onto the four speaker classes. Lookup is
/// case-insensitive; labels absent from the table map to `fallback`.
class SpeakerMap {
 public:
  SpeakerMap();  // ADULT/FEM/MAL, KEY_CHILD/CHI, OTHER_CHILD/OCH, UNKNOWN
  explicit SpeakerMap(std::map<std::string, Speaker> table,
                      Speaker fallback = Speaker::Unknown);

  Speaker map(std::string_view label) const;

 private:
  std::map<std::string, Speaker> table_;
  Speaker fallback_;
};

struct LoadOptions {
  SpeakerMap speakers;
  /// When set, frame labels outside the vocabulary are rejected. When unset
  /// the vocabulary is the set of labels seen in frames.jsonl.
  std::optional<LabelVocab> label_vocab;
  double end_slack_s = 1.0;
};

/// Immutable, validated corpus. Collections are held in canonical order
/// (sessions by id; utterances by session, start, end, id; frames by session
/// and timestamp) so that the loaded value does not depend on record order.
class Corpus {
 public:
  Corpus() = default;
  Corpus(std::vector<Session> sessions, std::vector<Utterance> utterances,
         std::vector<FrameRef> frames, LabelVocab vocab,
         double end_slack_s = 1.0);

  std::span<const Session> sessions() const noexcept { return sessions_; }
  std::span<const Utterance> utterances() const noexcept { return utterances_; }
  std::span<const FrameRef> frames() const noexcept { return frames_; }
  const LabelVocab& label_vocab() const noexcept { return vocab_; }

  const Session* find_session(std::string_view id) const;
  const Utterance* find_utterance(std::string_view id) const;
  const FrameRef* find_frame(std::string_view id) const;

  /// Frames of one session, ascending by t_s.
  std::span<const FrameRef> session_frames(std::string_view session_id) const;

  /// Non-fatal load diagnostics (unknown keys, out-of-profile ages).
  std::span<const std::string> warnings() const noexcept { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

  bool operator==(const Corpus& other) const {
    return sessions_ == other.sessions_ && utterances_ == other.utterances_ &&
           frames_ == other.frames_ && vocab_ == other.vocab_;
  }

 private:
  void build_indexes();

  std::vector<Session> sessions_;
  std::vector<Utterance> utterances_;
  std::vector<FrameRef> frames_;
  LabelVocab vocab_;
  std::vector<std::string> warnings_;

  std::unordered_map<std::string, std::size_t> session_index_;
  std::unordered_map<std::string, std::size_t> utterance_index_;
  std::unordered_map<std::string, std::size_t> frame_index_;
  // session id -> [begin, end) range into frames_
  std::unordered_map<std::string, std::pair<std::size_t, std::size_t>> frame_ranges_;
};

Corpus load_corpus(const std::filesystem::path& transcript_path,
                   const std::filesystem::path& frames_path,
                   const std::filesystem::path& sessions_path,
                   const LoadOptions& options = {});

/// Writes transcripts.jsonl, frames.jsonl and sessions.jsonl into `dir`.
/// Writes sessions.jsonl, transcripts.jsonl and frames.jsonl. A non-empty
/// `header_line` (e.g. a manifest line) is written first in each file.
void write_corpus(const Corpus& corpus, const std::filesystem::path& dir,
                  std::string_view header_line = {});

/// Frames of the utterance's session with floor(start_s) <= t_s <= ceil(end_s),
/// ascending by t_s. May be empty.
std::vector<FrameRef> concurrent_frames(const Corpus& corpus, const Utterance& utterance);

}  // namespace align
