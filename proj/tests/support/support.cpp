#include "support.hpp"

#include <atomic>
#include <fstream>
#include <stdexcept>

#include <unistd.h>

namespace align::testing {

TempDir::TempDir(std::string_view tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          (std::string(tag) + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_text(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << contents;
}

Session session(std::string id, std::string child, double age, double duration) {
  Session s;
  s.session_id = std::move(id);
  s.child_id = std::move(child);
  s.age_months = age;
  s.duration_s = duration;
  return s;
}

Utterance utterance(std::string id, double start, double end, Speaker speaker,
                    std::string session_id, std::string text) {
  Utterance u;
  u.utterance_id = std::move(id);
  u.session_id = std::move(session_id);
  u.start_s = start;
  u.end_s = end;
  u.speaker = speaker;
  u.text = std::move(text);
  return u;
}

std::vector<FrameRef> frames(std::string_view session_id, int n_frames) {
  std::vector<FrameRef> out;
  for (int t = 0; t < n_frames; ++t) {
    FrameRef f;
    f.session_id = std::string(session_id);
    f.frame_id = std::string(session_id) + "-f" + std::to_string(t);
    f.t_s = t;
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace align::testing
