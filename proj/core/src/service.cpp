#include "align/service.hpp"

#include <algorithm>
#include <cstdio>
#include <span>
#include <sstream>

#include "align/error.hpp"

namespace align::service {

namespace {

Reply error_reply(int status, std::string_view error, std::string message) {
  return Reply{status, json{{"error", error}, {"message", std::move(message)}}};
}

json entry_to_json(const ResponseLogEntry& e) {
  return json{{"sequence", e.sequence}, {"idempotency_key", e.idempotency_key},
              {"response", response_to_json(e.response)}};
}

constexpr const char* kSessionsLog = "sessions.log.jsonl";
constexpr const char* kResponsesLog = "responses.log.jsonl";

struct LogLine {
  json value;
  std::size_t line;
};

/// Reads an append-only log. A torn final line (a crash mid-append) is
/// dropped and the file truncated to its last complete record; a malformed
/// line anywhere else is corruption.
std::vector<LogLine> read_log(const std::filesystem::path& path) {
  std::vector<LogLine> lines;
  if (!std::filesystem::exists(path)) return lines;
  const std::string contents = read_file(path);
  std::size_t pos = 0, line_no = 0, valid_end = 0;
  while (pos < contents.size()) {
    const std::size_t nl = contents.find('\n', pos);
    const bool complete = nl != std::string::npos;
    const std::string_view text(contents.data() + pos, (complete ? nl : contents.size()) - pos);
    ++line_no;
    const std::size_t next = complete ? nl + 1 : contents.size();
    if (!text.empty()) {
      json j = json::parse(text, nullptr, false);
      if (j.is_discarded() || !complete) {
        if (next < contents.size()) {
          throw IntegrityError(path.filename().string() + ":" + std::to_string(line_no) +
                               ": corrupt log line");
        }
        break;
      }
      lines.push_back({std::move(j), line_no});
    }
    valid_end = next;
    pos = next;
  }
  if (valid_end < contents.size()) std::filesystem::resize_file(path, valid_end);
  return lines;
}

}  // namespace

// ---------------------------------------------------------------------------
// StudyData

StudyData StudyData::from(std::span<const Trial> trials, const Assignment& assignment,
                          std::map<std::string, std::string, std::less<>> utterance_text) {
  StudyData d;
  for (const auto& t : trials) d.trials.emplace(t.trial_id, t);
  for (const auto& t : assignment.catch_trials) d.trials.emplace(t.trial_id, t);
  d.slots = assignment.slots;
  d.seed = assignment.seed;
  d.utterance_text = std::move(utterance_text);
  for (const auto& slot : d.slots) {
    for (const auto& id : slot.items) {
      if (!d.trials.contains(id)) {
        throw IntegrityError("assignment slot " + std::to_string(slot.slot) +
                             " refers to unknown trial '" + id + "'");
      }
    }
  }
  return d;
}

StudyData StudyData::load(const std::filesystem::path& study_dir) {
  const auto trials = read_trials_jsonl(study_dir / "trials.jsonl");
  json aj;
  try {
    aj = json::parse(read_file(study_dir / "assignment.json"));
  } catch (const json::exception& e) {
    throw ParseError("assignment.json: " + std::string(e.what()));
  }
  const Assignment assignment = assignment_from_json(aj);
  std::map<std::string, std::string, std::less<>> texts;
  const auto transcripts = study_dir / "transcripts.jsonl";
  if (std::filesystem::exists(transcripts)) {
    read_jsonl(transcripts, [&](const json& j, std::size_t) {
      if (j.contains("utterance_id") && j.contains("text")) {
        texts[j["utterance_id"].get<std::string>()] = j["text"].get<std::string>();
      }
    });
  }
  StudyData d = from(trials, assignment, std::move(texts));
  d.serve_audio = std::filesystem::exists(study_dir / "media" / "audio");
  return d;
}

// ---------------------------------------------------------------------------
// StudyService

StudyService::StudyService() : clock_(utc_timestamp) {}

StudyService::StudyService(StudyData data, std::optional<std::filesystem::path> log_dir,
                           StudyConfig config)
    : loaded_(true),
      data_(std::move(data)),
      config_(config),
      log_dir_(std::move(log_dir)),
      clock_(utc_timestamp) {
  config_.validate();
  slot_taken_.assign(data_.slots.size(), false);
  if (log_dir_) {
    std::filesystem::create_directories(*log_dir_);
    replay_logs();
    session_log_.open(*log_dir_ / kSessionsLog, std::ios::app | std::ios::binary);
    response_log_.open(*log_dir_ / kResponsesLog, std::ios::app | std::ios::binary);
    if (!session_log_ || !response_log_) {
      throw IoError("cannot open service logs under " + log_dir_->string());
    }
  }
}

StudyService::~StudyService() = default;

StudyService::Session* StudyService::find_session(std::string_view annotator_id) const {
  std::shared_lock lock(sessions_mutex_);
  auto it = sessions_.find(annotator_id);
  return it == sessions_.end() ? nullptr : it->second.get();
}

json StudyService::progress(const SessionState& s) const {
  return json{{"cursor", s.cursor}, {"n_trials", s.n_trials}, {"completed", s.completed}};
}

void StudyService::replay_logs() {
  for (const auto& [j, line] : read_log(*log_dir_ / kSessionsLog)) {
    const std::string id = j.at("annotator_id").get<std::string>();
    const int slot = j.at("slot").get<int>();
    if (slot < 0 || static_cast<std::size_t>(slot) >= data_.slots.size() || slot_taken_[slot] ||
        sessions_.contains(id)) {
      throw IntegrityError(std::string(kSessionsLog) + ":" + std::to_string(line) +
                           ": inconsistent session record for '" + id + "'");
    }
    auto session = std::make_unique<Session>();
    session->slot = &data_.slots[slot];
    session->state = SessionState{id, slot, session->slot->condition, 0, session->slot->items.size(),
                                  session->slot->items.empty()};
    slot_taken_[slot] = true;
    ++opened_per_condition_[session->slot->condition];
    ++arrivals_;
    sessions_.emplace(id, std::move(session));
  }
  for (const auto& [j, line] : read_log(*log_dir_ / kResponsesLog)) {
    ResponseLogEntry e;
    e.sequence = j.at("sequence").get<std::uint64_t>();
    e.idempotency_key = j.at("idempotency_key").get<std::string>();
    e.response = response_from_json(j);
    const std::string where = std::string(kResponsesLog) + ":" + std::to_string(line);
    if (e.sequence != log_.size() + 1) throw IntegrityError(where + ": sequence gap");
    if (key_index_.contains(e.idempotency_key)) throw IntegrityError(where + ": duplicate idempotency key");
    auto it = sessions_.find(e.response.annotator_id);
    if (it == sessions_.end()) throw IntegrityError(where + ": response from unknown session");
    SessionState& s = it->second->state;
    if (s.cursor >= s.n_trials || it->second->slot->items[s.cursor] != e.response.trial_id) {
      throw IntegrityError(where + ": response out of order for '" + s.annotator_id + "'");
    }
    ++s.cursor;
    s.completed = s.cursor == s.n_trials;
    key_index_.emplace(e.idempotency_key, log_.size());
    log_.push_back(std::move(e));
  }
}

void StudyService::append_session_log(const SessionState& state) {
  if (!session_log_.is_open()) return;
  session_log_ << json{{"annotator_id", state.annotator_id}, {"slot", state.slot}}.dump() << '\n';
  session_log_.flush();
  if (!session_log_) throw IoError("session log write failed");
}

Reply StudyService::open_session(std::string_view annotator_id) {
  if (!loaded_) return error_reply(503, "NotLoaded", "no study is loaded");
  if (annotator_id.empty()) return error_reply(400, "BadRequest", "annotator_id is required");
  std::unique_lock lock(sessions_mutex_);
  auto it = sessions_.find(annotator_id);
  if (it != sessions_.end()) {
    std::lock_guard session_lock(it->second->mutex);
    const SessionState& s = it->second->state;
    return Reply{200, json{{"annotator_id", s.annotator_id},
                           {"condition", to_string(s.condition)},
                           {"n_trials", s.n_trials},
                           {"resumed", true},
                           {"progress", progress(s)}}};
  }
  // Balance conditions by arrival: the condition with fewer opened sessions
  // (ties to the earlier condition) among those with a free slot.
  std::optional<std::size_t> chosen;
  for (std::size_t i = 0; i < data_.slots.size(); ++i) {
    if (slot_taken_[i]) continue;
    if (!chosen) {
      chosen = i;
      continue;
    }
    const auto ci = data_.slots[i].condition, cc = data_.slots[*chosen].condition;
    if (ci != cc && opened_per_condition_[ci] < opened_per_condition_[cc]) chosen = i;
  }
  if (!chosen) {
    return error_reply(409, "StudyFull",
                       "all " + std::to_string(data_.slots.size()) + " annotator slots are taken");
  }
  auto session = std::make_unique<Session>();
  session->slot = &data_.slots[*chosen];
  session->state = SessionState{std::string(annotator_id), session->slot->slot,
                                session->slot->condition, 0, session->slot->items.size(),
                                session->slot->items.empty()};
  session->state.slot = static_cast<int>(*chosen);
  append_session_log(session->state);
  slot_taken_[*chosen] = true;
  ++opened_per_condition_[session->slot->condition];
  ++arrivals_;
  const SessionState s = session->state;
  sessions_.emplace(std::string(annotator_id), std::move(session));
  return Reply{200, json{{"annotator_id", s.annotator_id},
                         {"condition", to_string(s.condition)},
                         {"n_trials", s.n_trials},
                         {"resumed", false},
                         {"progress", progress(s)}}};
}

json StudyService::trial_payload(const Trial& trial, std::size_t position, std::size_t n_trials) const {
  json options = json::array();
  json prompt;
  auto utterance_json = [&](const std::string& id) {
    json u{{"kind", "utterance"}, {"id", id}};
    auto text = data_.utterance_text.find(id);
    u["text"] = text == data_.utterance_text.end() ? json(nullptr) : json(text->second);
    if (data_.serve_audio) u["audio"] = "/media/audio/" + id;
    return u;
  };
  auto frame_json = [](const std::string& id) {
    return json{{"kind", "frame"}, {"id", id}, {"src", "/media/frame/" + id}};
  };
  if (trial.is_catch) {
    prompt = json{{"kind", "question"}, {"text", trial.catch_payload->question}};
    for (int p = 0; p < 4; ++p) {
      options.push_back(json{{"index", p}, {"kind", "text"}, {"text", trial.option_at(p)}});
    }
  } else {
    prompt = trial.condition == Condition::Image ? utterance_json(trial.target_utterance_id)
                                                 : frame_json(trial.target_frame_id);
    for (int p = 0; p < 4; ++p) {
      json o = trial.condition == Condition::Image ? frame_json(trial.option_at(p))
                                                   : utterance_json(trial.option_at(p));
      o["index"] = p;
      options.push_back(std::move(o));
    }
  }
  return json{{"trial_id", trial.trial_id}, {"condition", to_string(trial.condition)},
              {"position", position},       {"n_trials", n_trials},
              {"prompt", std::move(prompt)}, {"options", std::move(options)}};
}

Reply StudyService::next_trial(std::string_view annotator_id) {
  if (!loaded_) return error_reply(503, "NotLoaded", "no study is loaded");
  Session* session = find_session(annotator_id);
  if (!session) return error_reply(404, "NoSession", "no session for '" + std::string(annotator_id) + "'");
  std::lock_guard lock(session->mutex);
  const SessionState& s = session->state;
  if (s.cursor >= s.n_trials) return Reply{204, json()};
  const Trial& trial = data_.trials.find(session->slot->items[s.cursor])->second;
  return Reply{200, trial_payload(trial, s.cursor, s.n_trials)};
}

Reply StudyService::submit(const SubmitRequest& request) {
  if (!loaded_) return error_reply(503, "NotLoaded", "no study is loaded");
  if (request.idempotency_key.empty()) {
    return error_reply(400, "BadRequest", "idempotency_key is required");
  }
  Session* session = find_session(request.annotator_id);
  if (!session) {
    return error_reply(404, "NoSession", "no session for '" + request.annotator_id + "'");
  }
  std::lock_guard lock(session->mutex);
  SessionState& s = session->state;
  {
    std::lock_guard log_lock(log_mutex_);
    auto dup = key_index_.find(request.idempotency_key);
    if (dup != key_index_.end()) {
      const ResponseLogEntry& e = log_[dup->second];
      return Reply{200, json{{"accepted", false},
                             {"sequence", e.sequence},
                             {"trial_id", e.response.trial_id},
                             {"progress", progress(s)}}};
    }
  }
  if (s.cursor >= s.n_trials) return error_reply(409, "WrongTrial", "session is completed");
  const std::string& current = session->slot->items[s.cursor];
  if (request.trial_id != current) {
    return error_reply(409, "WrongTrial",
                       "expected trial '" + current + "', got '" + request.trial_id + "'");
  }
  if (request.choice_index < 0 || request.choice_index > 3) {
    return error_reply(422, "BadChoiceIndex",
                       "choice_index must be in 0..3, got " + std::to_string(request.choice_index));
  }
  const Trial& trial = data_.trials.find(current)->second;
  ResponseLogEntry e;
  e.idempotency_key = request.idempotency_key;
  e.response.annotator_id = request.annotator_id;
  e.response.trial_id = trial.trial_id;
  e.response.choice_index = request.choice_index;
  e.response.correct = trial.is_correct(request.choice_index);
  e.response.is_catch = trial.is_catch;
  e.response.rt_ms = request.rt_ms;
  e.response.received_at = clock_();
  {
    std::lock_guard log_lock(log_mutex_);
    // Linearization point: the sequence number is assigned and the record is
    // durable before any in-memory state changes.
    e.sequence = log_.size() + 1;
    char id[32];
    std::snprintf(id, sizeof id, "resp-%08llu", static_cast<unsigned long long>(e.sequence));
    e.response.response_id = id;
    if (response_log_.is_open()) {
      response_log_ << entry_to_json(e).dump() << '\n';
      response_log_.flush();
      if (!response_log_) return error_reply(500, "IoError", "response log write failed");
    }
    key_index_.emplace(e.idempotency_key, log_.size());
    log_.push_back(e);
  }
  ++s.cursor;
  s.completed = s.cursor == s.n_trials;
  return Reply{200, json{{"accepted", true}, {"sequence", e.sequence}, {"progress", progress(s)}}};
}

std::vector<ResponseLogEntry> StudyService::log() const {
  std::lock_guard lock(log_mutex_);
  return log_;
}

std::vector<SessionState> StudyService::sessions() const {
  std::shared_lock lock(sessions_mutex_);
  std::vector<SessionState> out;
  for (const auto& [id, session] : sessions_) {
    std::lock_guard session_lock(session->mutex);
    out.push_back(session->state);
  }
  return out;
}

Reply StudyService::export_report() const {
  const auto entries = log();
  std::vector<Response> responses;
  json lines = json::array();
  for (const auto& e : entries) {
    responses.push_back(e.response);
    lines.push_back(entry_to_json(e));
  }
  const auto ex = apply_exclusions(responses, config_);
  json header{{"format", "align-responses"},
              {"version", 1},
              {"loaded", loaded_},
              {"seed", data_.seed},
              {"n_slots", data_.slots.size()},
              {"n_responses", entries.size()},
              {"max_catch_failures", config_.max_catch_failures}};
  json exclusions{{"kept_annotators", ex.kept_annotators},
                  {"excluded_annotators", ex.excluded_annotators},
                  {"catch_failures", ex.catch_failures}};
  return Reply{200, json{{"header", std::move(header)},
                         {"responses", std::move(lines)},
                         {"exclusions", std::move(exclusions)}}};
}

std::string StudyService::export_jsonl() const {
  Manifest m;
  m.subcommand = "serve";
  m.seed = data_.seed;
  m.config = json{{"max_catch_failures", config_.max_catch_failures},
                  {"annotations_per_trial_target", config_.annotations_per_trial_target}};
  std::ostringstream out;
  out << manifest_line(m);
  for (const auto& e : log()) out << entry_to_json(e).dump() << '\n';
  return out.str();
}

}  // namespace align::service
