#include "align/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>
#include <thread>
#include <tuple>

#include "align/error.hpp"
#include "align/io.hpp"

namespace align {

void AnalysisConfig::validate() const {
  if (!(tau > 0.0 && tau < 1.0)) throw ConfigError("tau must be in (0, 1)");
  if (fps != 1) throw ConfigError("only the 1 fps frame grid is supported");
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
  if (u.dim() != v.dim()) {
    throw DimMismatch("cosine of vectors with dims " + std::to_string(u.dim()) + " and " +
                      std::to_string(v.dim()));
  }
  const auto a = u.values();
  const auto b = v.values();
  long double acc = 0.0L;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<long double>(a[i]) * b[i];
  return std::clamp(static_cast<double>(acc), -1.0, 1.0);
}

std::size_t argmax_first(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

AlignmentRecord score_utterance(const Corpus& corpus, const EmbeddingStores& stores,
                                const AnalysisConfig& config, const Utterance& utterance) {
  const auto frames = concurrent_frames(corpus, utterance);
  if (frames.empty()) {
    throw MissingFrames("utterance '" + utterance.utterance_id + "' has no concurrent frames");
  }
  const EmbeddingVector* text = stores.text.find(utterance.utterance_id);
  if (text == nullptr) {
    throw MissingEmbedding("no text embedding for utterance '" + utterance.utterance_id + "'");
  }
  AlignmentRecord record;
  record.utterance_id = utterance.utterance_id;
  record.frame_scores.reserve(frames.size());
  std::vector<double> scores;
  scores.reserve(frames.size());
  for (const auto& frame : frames) {
    const EmbeddingVector* image = stores.image.find(frame.frame_id);
    if (image == nullptr) {
      throw MissingEmbedding("no image embedding for frame '" + frame.frame_id + "'");
    }
    const double s = cosine(*text, *image);
    record.frame_scores.push_back({frame.frame_id, s});
    scores.push_back(s);
  }
  const std::size_t best = argmax_first(scores);
  record.max_score = scores[best];
  record.argmax_frame = frames[best].frame_id;
  record.is_high = record.max_score >= config.tau;
  record.n_frames = frames.size();
  return record;
}

ScoreResult score_corpus(const Corpus& corpus, const EmbeddingStores& stores,
                         const AnalysisConfig& config, std::optional<Speaker> speaker_filter,
                         unsigned threads) {
  config.validate();
  std::vector<const Utterance*> selected;
  for (const auto& u : corpus.utterances()) {
    if (!speaker_filter || u.speaker == *speaker_filter) selected.push_back(&u);
  }

  struct Slot {
    std::optional<AlignmentRecord> record;
    std::optional<SkippedUtterance> skip;
  };
  std::vector<Slot> slots(selected.size());
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        slots[i].record = score_utterance(corpus, stores, config, *selected[i]);
      } catch (const MissingFrames& e) {
        slots[i].skip = SkippedUtterance{selected[i]->utterance_id, "MissingFrames", e.what()};
      } catch (const MissingEmbedding& e) {
        slots[i].skip = SkippedUtterance{selected[i]->utterance_id, "MissingEmbedding", e.what()};
      }
    }
  };
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(selected.size())));
  if (threads <= 1) {
    work(0, selected.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (selected.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(selected.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }

  ScoreResult result;
  for (auto& slot : slots) {
    if (slot.record) result.records.push_back(std::move(*slot.record));
    if (slot.skip) result.skipped.push_back(std::move(*slot.skip));
  }
  return result;
}

GroupKey parse_group_key(std::string_view name) {
  if (name == "child" || name == "child_id") return GroupKey::Child;
  if (name == "age" || name == "age_bin" || name == "age_bin_months") return GroupKey::AgeBin;
  if (name == "speaker") return GroupKey::Speaker;
  if (name == "session" || name == "session_id") return GroupKey::Session;
  throw ConfigError("unknown group key '" + std::string(name) + "'");
}

std::string_view to_string(GroupKey key) {
  switch (key) {
    case GroupKey::Child: return "child_id";
    case GroupKey::AgeBin: return "age_bin_months";
    case GroupKey::Speaker: return "speaker";
    case GroupKey::Session: return "session_id";
  }
  return "";
}

std::vector<SummaryRow> summarize(std::span<const AlignmentRecord> records, const Corpus& corpus,
                                  std::span<const GroupKey> group_by, int age_bin_width_months) {
  if (records.empty()) throw EmptyGroupSet("no alignment records to summarize");
  if (age_bin_width_months <= 0) throw ConfigError("age bin width must be positive");

  using Key = std::tuple<std::string, int, int, std::string>;
  struct Acc {
    SummaryRow row;
    double score_sum = 0.0;
  };
  std::map<Key, Acc> groups;
  for (const auto& r : records) {
    const Utterance* u = corpus.find_utterance(r.utterance_id);
    if (u == nullptr) throw IntegrityError("record for unknown utterance '" + r.utterance_id + "'");
    const Session* s = corpus.find_session(u->session_id);
    SummaryRow row;
    Key key{"", -1, -1, ""};
    for (GroupKey g : group_by) {
      switch (g) {
        case GroupKey::Child:
          row.child_id = s->child_id;
          std::get<0>(key) = s->child_id;
          break;
        case GroupKey::AgeBin: {
          const int bin = static_cast<int>(std::floor(s->age_months / age_bin_width_months)) *
                          age_bin_width_months;
          row.age_bin_months = bin;
          std::get<1>(key) = bin;
          break;
        }
        case GroupKey::Speaker:
          row.speaker = u->speaker;
          std::get<2>(key) = static_cast<int>(u->speaker);
          break;
        case GroupKey::Session:
          row.session_id = s->session_id;
          std::get<3>(key) = s->session_id;
          break;
      }
    }
    auto [it, inserted] = groups.try_emplace(key, Acc{row, 0.0});
    Acc& acc = it->second;
    acc.row.n_utterances += 1;
    acc.row.n_high += r.is_high ? 1 : 0;
    acc.score_sum += r.max_score;
  }
  std::vector<SummaryRow> rows;
  rows.reserve(groups.size());
  for (auto& [_, acc] : groups) {
    acc.row.prop_high =
        static_cast<double>(acc.row.n_high) / static_cast<double>(acc.row.n_utterances);
    acc.row.mean_score = acc.score_sum / static_cast<double>(acc.row.n_utterances);
    rows.push_back(std::move(acc.row));
  }
  return rows;
}

void write_alignment_jsonl(std::ostream& out, std::span<const AlignmentRecord> records,
                           bool per_frame) {
  for (const auto& r : records) {
    json j{{"utterance_id", r.utterance_id},
           {"max_score", r.max_score},
           {"argmax_frame", r.argmax_frame},
           {"is_high", r.is_high},
           {"n_frames", r.n_frames}};
    if (per_frame) {
      json frames = json::array();
      for (const auto& f : r.frame_scores) frames.push_back({{"frame_id", f.frame_id}, {"score", f.score}});
      j["frame_scores"] = std::move(frames);
    }
    out << j.dump() << '\n';
  }
}

std::vector<AlignmentRecord> read_alignment_jsonl(const std::filesystem::path& path) {
  std::vector<AlignmentRecord> records;
  read_jsonl(path, [&](const json& j, std::size_t line) {
    try {
      AlignmentRecord r;
      r.utterance_id = j.at("utterance_id").get<std::string>();
      r.max_score = j.at("max_score").get<double>();
      r.argmax_frame = j.at("argmax_frame").get<std::string>();
      r.is_high = j.at("is_high").get<bool>();
      r.n_frames = j.value("n_frames", std::size_t{0});
      if (j.contains("frame_scores")) {
        for (const auto& f : j["frame_scores"]) {
          r.frame_scores.push_back({f.at("frame_id").get<std::string>(), f.at("score").get<double>()});
        }
      }
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ParseError(path.filename().string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return records;
}

}  // namespace align
