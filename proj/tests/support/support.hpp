#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "align/corpus.hpp"

namespace align::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(std::string_view tag = "align");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(std::string_view name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, std::string_view contents);

/// One session "s1" (child "c1", 20 months, 100 s) with frames at t = 0..n_frames-1.
Session session(std::string id = "s1", std::string child = "c1", double age = 20.0,
                double duration = 100.0);
Utterance utterance(std::string id, double start, double end, Speaker speaker = Speaker::Adult,
                    std::string session_id = "s1", std::string text = "look at the ball");
std::vector<FrameRef> frames(std::string_view session_id, int n_frames);

}  // namespace align::testing
