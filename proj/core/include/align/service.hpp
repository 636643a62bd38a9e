#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "align/io.hpp"
#include "align/study.hpp"

namespace align::service {

/// Everything the service needs to run a study, normally read from a study
/// directory: trials.jsonl, assignment.json and (for utterance text)
/// transcripts.jsonl.
struct StudyData {
  std::map<std::string, Trial, std::less<>> trials;  // test and catch trials by id
  std::vector<AnnotatorSlot> slots;
  std::map<std::string, std::string, std::less<>> utterance_text;
  std::uint64_t seed = 0;
  bool serve_audio = false;

  static StudyData load(const std::filesystem::path& study_dir);
  static StudyData from(std::span<const Trial> trials, const Assignment& assignment,
                        std::map<std::string, std::string, std::less<>> utterance_text = {});
};

struct Reply {
  int status = 200;
  json body = json::object();
};

struct SubmitRequest {
  std::string annotator_id;
  std::string trial_id;
  int choice_index = 0;
  std::optional<std::int64_t> rt_ms;
  std::string idempotency_key;
};

struct ResponseLogEntry {
  std::uint64_t sequence = 0;
  std::string idempotency_key;
  Response response;
};

struct SessionState {
  std::string annotator_id;
  int slot = 0;
  Condition condition = Condition::Image;
  std::size_t cursor = 0;
  std::size_t n_trials = 0;
  bool completed = false;

  bool operator==(const SessionState&) const = default;
};

/// Annotation study state machine. Sessions and responses are persisted to
/// append-only JSONL logs under `log_dir` (sessions.log.jsonl,
/// responses.log.jsonl); constructing a service over existing logs replays
/// them. Requests for one annotator are serialized by a per-session mutex;
/// the response log append is the single global linearization point.
class StudyService {
 public:
  /// A service with no study loaded answers 503 to session requests.
  StudyService();
  StudyService(StudyData data, std::optional<std::filesystem::path> log_dir,
               StudyConfig config = {});
  ~StudyService();

  StudyService(const StudyService&) = delete;
  StudyService& operator=(const StudyService&) = delete;

  bool loaded() const noexcept { return loaded_; }

  Reply open_session(std::string_view annotator_id);
  Reply next_trial(std::string_view annotator_id);
  Reply submit(const SubmitRequest& request);

  /// JSON export: header, responses in sequence order and exclusion report.
  Reply export_report() const;
  /// responses.jsonl body in sequence order.
  std::string export_jsonl() const;

  std::vector<SessionState> sessions() const;  // sorted by annotator id
  std::vector<ResponseLogEntry> log() const;
  const StudyConfig& config() const noexcept { return config_; }

  /// Source of received_at stamps; defaults to utc_timestamp. Tests install
  /// a fixed clock for byte-stable logs.
  void set_clock(std::function<std::string()> clock) { clock_ = std::move(clock); }

  /// Wire payload for a trial. Contains neither the target position, the
  /// catch answer, nor any alignment score.
  json trial_payload(const Trial& trial, std::size_t position, std::size_t n_trials) const;

 private:
  struct Session {
    std::mutex mutex;
    SessionState state;
    const AnnotatorSlot* slot = nullptr;
  };

  Session* find_session(std::string_view annotator_id) const;
  json progress(const SessionState& state) const;
  void replay_logs();
  void append_session_log(const SessionState& state);

  bool loaded_ = false;
  StudyData data_;
  StudyConfig config_;
  std::optional<std::filesystem::path> log_dir_;
  std::function<std::string()> clock_;

  mutable std::shared_mutex sessions_mutex_;
  std::map<std::string, std::unique_ptr<Session>, std::less<>> sessions_;
  std::vector<bool> slot_taken_;
  std::map<Condition, std::size_t> opened_per_condition_;
  std::size_t arrivals_ = 0;

  mutable std::mutex log_mutex_;
  std::vector<ResponseLogEntry> log_;
  std::unordered_map<std::string, std::size_t> key_index_;  // idempotency_key -> log position
  std::ofstream session_log_;
  std::ofstream response_log_;
};

/// HTTP/JSON front end over a StudyService:
///   POST /api/session, GET /api/trial/next, POST /api/response,
///   GET /api/export (?format=jsonl), static /media/{frame|audio}/{id}
///   and the annotator UI from `public_dir` when present.
class HttpServer {
 public:
  HttpServer(StudyService& service, std::optional<std::filesystem::path> media_dir = {},
             std::optional<std::filesystem::path> public_dir = {});
  ~HttpServer();

  /// Binds; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace align::service
