#include "align/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "align/error.hpp"
#include "align/io.hpp"
#include "align/text.hpp"

namespace align {

std::string_view to_string(Speaker speaker) {
  switch (speaker) {
    case Speaker::Adult: return "ADULT";
    case Speaker::KeyChild: return "KEY_CHILD";
    case Speaker::OtherChild: return "OTHER_CHILD";
    case Speaker::Unknown: return "UNKNOWN";
  }
  return "UNKNOWN";
}

std::optional<Speaker> parse_speaker_name(std::string_view name) {
  if (name == "ADULT") return Speaker::Adult;
  if (name == "KEY_CHILD") return Speaker::KeyChild;
  if (name == "OTHER_CHILD") return Speaker::OtherChild;
  if (name == "UNKNOWN") return Speaker::Unknown;
  return std::nullopt;
}

std::string_view to_string(LanguageFlag flag) {
  return flag == LanguageFlag::MonolingualEnglish ? "monolingual_english" : "other";
}

SpeakerMap::SpeakerMap()
    : SpeakerMap({{"adult", Speaker::Adult},
                  {"fem", Speaker::Adult},
                  {"mal", Speaker::Adult},
                  {"key_child", Speaker::KeyChild},
                  {"chi", Speaker::KeyChild},
                  {"other_child", Speaker::OtherChild},
                  {"och", Speaker::OtherChild},
                  {"unknown", Speaker::Unknown}}) {}

SpeakerMap::SpeakerMap(std::map<std::string, Speaker> table, Speaker fallback)
    : fallback_(fallback) {
  for (auto& [label, speaker] : table) table_[text::ascii_lower(label)] = speaker;
}

Speaker SpeakerMap::map(std::string_view label) const {
  auto it = table_.find(text::ascii_lower(text::trim(label)));
  return it == table_.end() ? fallback_ : it->second;
}

Corpus::Corpus(std::vector<Session> sessions, std::vector<Utterance> utterances,
               std::vector<FrameRef> frames, LabelVocab vocab, double end_slack_s)
    : sessions_(std::move(sessions)),
      utterances_(std::move(utterances)),
      frames_(std::move(frames)),
      vocab_(std::move(vocab)) {
  for (auto& u : utterances_) u.token_count = static_cast<int>(text::tokenize(u.text).size());
  std::sort(sessions_.begin(), sessions_.end(),
            [](const Session& a, const Session& b) { return a.session_id < b.session_id; });
  std::sort(utterances_.begin(), utterances_.end(), [](const Utterance& a, const Utterance& b) {
    return std::tie(a.session_id, a.start_s, a.end_s, a.utterance_id) <
           std::tie(b.session_id, b.start_s, b.end_s, b.utterance_id);
  });
  std::sort(frames_.begin(), frames_.end(), [](const FrameRef& a, const FrameRef& b) {
    return std::tie(a.session_id, a.t_s, a.frame_id) < std::tie(b.session_id, b.t_s, b.frame_id);
  });
  build_indexes();

  for (std::size_t i = 1; i < sessions_.size(); ++i) {
    if (sessions_[i].session_id == sessions_[i - 1].session_id) {
      throw IntegrityError("duplicate session_id '" + sessions_[i].session_id + "'");
    }
  }
  for (const auto& s : sessions_) {
    if (!(s.duration_s > 0.0)) {
      throw RangeError("session '" + s.session_id + "' has non-positive duration_s");
    }
    if (s.age_months < 0.0) {
      throw RangeError("session '" + s.session_id + "' has negative age_months");
    }
    if (s.age_months > 48.0) {
      warnings_.push_back("session '" + s.session_id + "' age_months " +
                          std::to_string(s.age_months) + " is outside [0, 48]");
    }
  }
  std::set<std::string_view> utterance_ids;
  for (const auto& u : utterances_) {
    if (!utterance_ids.insert(u.utterance_id).second) {
      throw IntegrityError("duplicate utterance_id '" + u.utterance_id + "'");
    }
    const Session* s = find_session(u.session_id);
    if (s == nullptr) {
      throw IntegrityError("utterance '" + u.utterance_id + "' references unknown session '" +
                           u.session_id + "'");
    }
    if (!(u.start_s >= 0.0) || !(u.start_s < u.end_s)) {
      throw RangeError("utterance '" + u.utterance_id + "' has start_s >= end_s or start_s < 0");
    }
    if (u.end_s > s->duration_s + end_slack_s) {
      throw RangeError("utterance '" + u.utterance_id + "' ends after its session (end_s " +
                       std::to_string(u.end_s) + ", duration " + std::to_string(s->duration_s) +
                       ")");
    }
    if (text::trim(u.text).empty()) {
      throw RangeError("utterance '" + u.utterance_id + "' has empty text");
    }
  }
  std::set<std::string_view> frame_ids;
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    const auto& f = frames_[i];
    if (!frame_ids.insert(f.frame_id).second) {
      throw IntegrityError("duplicate frame_id '" + f.frame_id + "'");
    }
    if (find_session(f.session_id) == nullptr) {
      throw IntegrityError("frame '" + f.frame_id + "' references unknown session '" +
                           f.session_id + "'");
    }
    if (f.t_s < 0) throw RangeError("frame '" + f.frame_id + "' has negative t_s");
    if (i > 0 && frames_[i - 1].session_id == f.session_id && frames_[i - 1].t_s == f.t_s) {
      throw IntegrityError("frames '" + frames_[i - 1].frame_id + "' and '" + f.frame_id +
                           "' share session and t_s");
    }
    if (f.activity && !vocab_.activities.contains(*f.activity)) {
      throw IntegrityError("frame '" + f.frame_id + "' activity '" + *f.activity +
                           "' is not in the label vocabulary");
    }
    if (f.location && !vocab_.locations.contains(*f.location)) {
      throw IntegrityError("frame '" + f.frame_id + "' location '" + *f.location +
                           "' is not in the label vocabulary");
    }
  }
}

void Corpus::build_indexes() {
  session_index_.clear();
  utterance_index_.clear();
  frame_index_.clear();
  frame_ranges_.clear();
  for (std::size_t i = 0; i < sessions_.size(); ++i) session_index_.emplace(sessions_[i].session_id, i);
  for (std::size_t i = 0; i < utterances_.size(); ++i) {
    utterance_index_.emplace(utterances_[i].utterance_id, i);
  }
  for (std::size_t i = 0; i < frames_.size(); ++i) {
    frame_index_.emplace(frames_[i].frame_id, i);
    auto [it, inserted] = frame_ranges_.try_emplace(frames_[i].session_id, i, i + 1);
    if (!inserted) it->second.second = i + 1;
  }
}

const Session* Corpus::find_session(std::string_view id) const {
  auto it = session_index_.find(std::string(id));
  return it == session_index_.end() ? nullptr : &sessions_[it->second];
}

const Utterance* Corpus::find_utterance(std::string_view id) const {
  auto it = utterance_index_.find(std::string(id));
  return it == utterance_index_.end() ? nullptr : &utterances_[it->second];
}

const FrameRef* Corpus::find_frame(std::string_view id) const {
  auto it = frame_index_.find(std::string(id));
  return it == frame_index_.end() ? nullptr : &frames_[it->second];
}

std::span<const FrameRef> Corpus::session_frames(std::string_view session_id) const {
  auto it = frame_ranges_.find(std::string(session_id));
  if (it == frame_ranges_.end()) return {};
  return std::span<const FrameRef>(frames_).subspan(it->second.first,
                                                     it->second.second - it->second.first);
}

namespace {

class RecordReader {
 public:
  RecordReader(const json& j, std::size_t line, const std::filesystem::path& path,
               std::initializer_list<std::string_view> known, std::vector<std::string>& warnings)
      : j_(j), line_(line), file_(path.filename().string()) {
    for (const auto& [key, _] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        warnings.push_back(where() + ": unknown key '" + key + "' ignored");
      }
    }
  }

  std::string where() const { return file_ + ":" + std::to_string(line_); }

  std::string string(const char* key) const {
    auto it = j_.find(key);
    if (it == j_.end() || !it->is_string()) {
      throw ParseError(where() + ": missing or non-string \"" + key + "\"");
    }
    return it->get<std::string>();
  }

  std::optional<std::string> optional_string(const char* key) const {
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) throw ParseError(where() + ": non-string \"" + key + "\"");
    return it->get<std::string>();
  }

  double number(const char* key) const {
    auto it = j_.find(key);
    if (it == j_.end() || !it->is_number()) {
      throw ParseError(where() + ": missing or non-numeric \"" + key + "\"");
    }
    const double v = it->get<double>();
    if (!std::isfinite(v)) throw ParseError(where() + ": non-finite \"" + key + "\"");
    return v;
  }

 private:
  const json& j_;
  std::size_t line_;
  std::string file_;
};

}  // namespace

Corpus load_corpus(const std::filesystem::path& transcript_path,
                   const std::filesystem::path& frames_path,
                   const std::filesystem::path& sessions_path, const LoadOptions& options) {
  std::vector<std::string> warnings;

  std::vector<Session> sessions;
  read_jsonl(sessions_path, [&](const json& j, std::size_t line) {
    RecordReader r(j, line, sessions_path,
                   {"session_id", "child_id", "age_months", "duration_s", "language_flag"},
                   warnings);
    Session s;
    s.session_id = r.string("session_id");
    s.child_id = r.string("child_id");
    s.age_months = r.number("age_months");
    s.duration_s = r.number("duration_s");
    if (auto flag = r.optional_string("language_flag")) {
      if (*flag == "monolingual_english") {
        s.language_flag = LanguageFlag::MonolingualEnglish;
      } else if (*flag == "other") {
        s.language_flag = LanguageFlag::Other;
      } else {
        throw ParseError(r.where() + ": unknown language_flag '" + *flag + "'");
      }
    }
    sessions.push_back(std::move(s));
  });

  std::vector<Utterance> utterances;
  read_jsonl(transcript_path, [&](const json& j, std::size_t line) {
    RecordReader r(j, line, transcript_path,
                   {"utterance_id", "session_id", "start_s", "end_s", "speaker", "text",
                    "token_count"},
                   warnings);
    Utterance u;
    u.utterance_id = r.string("utterance_id");
    u.session_id = r.string("session_id");
    u.start_s = r.number("start_s");
    u.end_s = r.number("end_s");
    if (!(u.start_s < u.end_s)) {
      throw RangeError(r.where() + ": utterance '" + u.utterance_id + "' has start_s >= end_s");
    }
    u.speaker = options.speakers.map(r.string("speaker"));
    u.text = r.string("text");
    if (text::trim(u.text).empty()) {
      throw ParseError(r.where() + ": utterance '" + u.utterance_id + "' has empty text");
    }
    u.token_count = static_cast<int>(text::tokenize(u.text).size());
    utterances.push_back(std::move(u));
  });

  std::vector<FrameRef> frames;
  LabelVocab seen;
  read_jsonl(frames_path, [&](const json& j, std::size_t line) {
    RecordReader r(j, line, frames_path, {"frame_id", "session_id", "t_s", "activity", "location"},
                   warnings);
    FrameRef f;
    f.frame_id = r.string("frame_id");
    f.session_id = r.string("session_id");
    const double t = r.number("t_s");
    if (t < 0 || std::floor(t) != t) {
      throw ParseError(r.where() + ": frame '" + f.frame_id +
                       "' t_s must be a non-negative integer on the 1 fps grid");
    }
    f.t_s = static_cast<std::int64_t>(t);
    f.activity = r.optional_string("activity");
    f.location = r.optional_string("location");
    if (f.activity) seen.activities.insert(*f.activity);
    if (f.location) seen.locations.insert(*f.location);
    frames.push_back(std::move(f));
  });

  Corpus corpus(std::move(sessions), std::move(utterances), std::move(frames),
                options.label_vocab.value_or(seen), options.end_slack_s);
  for (auto& w : warnings) corpus.add_warning(std::move(w));
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::filesystem::path& dir,
                  std::string_view header_line) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "sessions.jsonl", std::ios::binary | std::ios::trunc);
    out << header_line;
    for (const auto& s : corpus.sessions()) {
      json j{{"session_id", s.session_id},
             {"child_id", s.child_id},
             {"age_months", s.age_months},
             {"duration_s", s.duration_s}};
      if (s.language_flag != LanguageFlag::MonolingualEnglish) {
        j["language_flag"] = std::string(to_string(s.language_flag));
      }
      out << j.dump() << '\n';
    }
  }
  {
    std::ofstream out(dir / "transcripts.jsonl", std::ios::binary | std::ios::trunc);
    out << header_line;
    for (const auto& u : corpus.utterances()) {
      json j{{"utterance_id", u.utterance_id}, {"session_id", u.session_id},
             {"start_s", u.start_s},           {"end_s", u.end_s},
             {"speaker", to_string(u.speaker)}, {"text", u.text}};
      out << j.dump() << '\n';
    }
  }
  {
    std::ofstream out(dir / "frames.jsonl", std::ios::binary | std::ios::trunc);
    out << header_line;
    for (const auto& f : corpus.frames()) {
      json j{{"frame_id", f.frame_id}, {"session_id", f.session_id}, {"t_s", f.t_s}};
      if (f.activity) j["activity"] = *f.activity;
      if (f.location) j["location"] = *f.location;
      out << j.dump() << '\n';
    }
  }
}

std::vector<FrameRef> concurrent_frames(const Corpus& corpus, const Utterance& utterance) {
  const auto frames = corpus.session_frames(utterance.session_id);
  const auto lo = static_cast<std::int64_t>(std::floor(utterance.start_s));
  const auto hi = static_cast<std::int64_t>(std::ceil(utterance.end_s));
  auto first = std::lower_bound(frames.begin(), frames.end(), lo,
                                [](const FrameRef& f, std::int64_t t) { return f.t_s < t; });
  auto last = std::upper_bound(first, frames.end(), hi,
                               [](std::int64_t t, const FrameRef& f) { return t < f.t_s; });
  return {first, last};
}

}  // namespace align
