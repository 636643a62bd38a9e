#include <gtest/gtest.h>

#include "align/corpus.hpp"
#include "align/error.hpp"
#include "support.hpp"

namespace align {
namespace {

using testing::TempDir;
using testing::write_text;

struct Files {
  TempDir dir{"corpus"};
  std::filesystem::path t = dir / "transcripts.jsonl";
  std::filesystem::path f = dir / "frames.jsonl";
  std::filesystem::path s = dir / "sessions.jsonl";

  Files(std::string_view transcripts, std::string_view frames, std::string_view sessions) {
    write_text(t, transcripts);
    write_text(f, frames);
    write_text(s, sessions);
  }
  Corpus load(const LoadOptions& o = {}) const { return load_corpus(t, f, s, o); }
};

constexpr std::string_view kSessions = R"({"session_id":"s1","child_id":"c1","age_months":14.5,"duration_s":10}
)";
constexpr std::string_view kFrames = R"({"frame_id":"f0","session_id":"s1","t_s":0,"activity":"eating"}
{"frame_id":"f1","session_id":"s1","t_s":1,"location":"kitchen"}
{"frame_id":"f2","session_id":"s1","t_s":2}
{"frame_id":"f3","session_id":"s1","t_s":3}
{"frame_id":"f4","session_id":"s1","t_s":4}
)";
constexpr std::string_view kTranscripts = R"({"utterance_id":"u1","session_id":"s1","start_s":0.5,"end_s":1.5,"speaker":"ADULT","text":"Look, the ball!"}
{"utterance_id":"u2","session_id":"s1","start_s":2.0,"end_s":3.2,"speaker":"CHI","text":"ball"}
)";

TEST(LoadCorpus, ConsistentFilesLoadWithCounts) {
  Files files(kTranscripts, kFrames, kSessions);
  const Corpus c = files.load();
  EXPECT_EQ(c.sessions().size(), 1u);
  EXPECT_EQ(c.utterances().size(), 2u);
  EXPECT_EQ(c.frames().size(), 5u);
  EXPECT_EQ(c.find_utterance("u1")->token_count, 3);
  EXPECT_EQ(c.find_utterance("u2")->speaker, Speaker::KeyChild);
  EXPECT_EQ(c.label_vocab().activities, std::set<std::string>{"eating"});
  EXPECT_EQ(c.label_vocab().locations, std::set<std::string>{"kitchen"});
}

TEST(LoadCorpus, EndBeforeStartIsRangeErrorNamingUtterance) {
  Files files(R"({"utterance_id":"bad-utt","session_id":"s1","start_s":3.0,"end_s":2.0,"speaker":"ADULT","text":"x"}
)",
              kFrames, kSessions);
  try {
    files.load();
    FAIL() << "expected RangeError";
  } catch (const RangeError& e) {
    EXPECT_NE(std::string(e.what()).find("bad-utt"), std::string::npos);
  }
}

TEST(LoadCorpus, FrameWithUnknownSessionIsIntegrityError) {
  Files files(kTranscripts, R"({"frame_id":"f0","session_id":"nope","t_s":0}
)",
              kSessions);
  EXPECT_THROW(files.load(), IntegrityError);
}

TEST(LoadCorpus, DuplicateIdsAreIntegrityErrors) {
  Files dup_utt(std::string(kTranscripts) + std::string(kTranscripts), kFrames, kSessions);
  EXPECT_THROW(dup_utt.load(), IntegrityError);
  Files dup_t(kTranscripts, std::string(kFrames) + R"({"frame_id":"f9","session_id":"s1","t_s":4}
)",
              kSessions);
  EXPECT_THROW(dup_t.load(), IntegrityError);
}

TEST(LoadCorpus, MalformedLineReportsLineNumber) {
  Files files(std::string(kTranscripts) + "{not json\n", kFrames, kSessions);
  try {
    files.load();
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

TEST(LoadCorpus, NonIntegerFrameTimeIsRejected) {
  Files files(kTranscripts, R"({"frame_id":"f0","session_id":"s1","t_s":0.5}
)",
              kSessions);
  EXPECT_THROW(files.load(), Error);
}

TEST(LoadCorpus, EmptyTextAfterTrimIsRejected) {
  Files files(R"({"utterance_id":"u1","session_id":"s1","start_s":0.5,"end_s":1.5,"speaker":"ADULT","text":"   "}
)",
              kFrames, kSessions);
  EXPECT_THROW(files.load(), ParseError);
}

TEST(LoadCorpus, EndPastSessionBeyondSlackIsRangeError) {
  Files ok(R"({"utterance_id":"u1","session_id":"s1","start_s":9.5,"end_s":10.9,"speaker":"ADULT","text":"a"}
)",
           kFrames, kSessions);
  EXPECT_NO_THROW(ok.load());
  Files bad(R"({"utterance_id":"u1","session_id":"s1","start_s":9.5,"end_s":11.2,"speaker":"ADULT","text":"a"}
)",
            kFrames, kSessions);
  EXPECT_THROW(bad.load(), RangeError);
}

TEST(LoadCorpus, UnknownKeysWarnAndAgeAbove48Warns) {
  Files files(R"({"utterance_id":"u1","session_id":"s1","start_s":0.5,"end_s":1.5,"speaker":"ADULT","text":"a","confidence":0.9}
)",
              kFrames, R"({"session_id":"s1","child_id":"c1","age_months":50,"duration_s":10}
)");
  const Corpus c = files.load();
  ASSERT_GE(c.warnings().size(), 2u);
  bool unknown = false, age = false;
  for (const auto& w : c.warnings()) {
    unknown = unknown || w.find("confidence") != std::string::npos;
    age = age || w.find("age") != std::string::npos;
  }
  EXPECT_TRUE(unknown);
  EXPECT_TRUE(age);
}

TEST(LoadCorpus, ConfiguredVocabularyRejectsUnknownLabels) {
  Files files(kTranscripts, kFrames, kSessions);
  LoadOptions o;
  o.label_vocab = LabelVocab{{"playing"}, {"kitchen"}};
  EXPECT_THROW(files.load(o), Error);
}

TEST(LoadCorpus, RecordOrderDoesNotMatter) {
  Files a(kTranscripts, kFrames, kSessions);
  Files b(R"({"utterance_id":"u2","session_id":"s1","start_s":2.0,"end_s":3.2,"speaker":"CHI","text":"ball"}
{"utterance_id":"u1","session_id":"s1","start_s":0.5,"end_s":1.5,"speaker":"ADULT","text":"Look, the ball!"}
)",
          R"({"frame_id":"f4","session_id":"s1","t_s":4}
{"frame_id":"f2","session_id":"s1","t_s":2}
{"frame_id":"f0","session_id":"s1","t_s":0,"activity":"eating"}
{"frame_id":"f3","session_id":"s1","t_s":3}
{"frame_id":"f1","session_id":"s1","t_s":1,"location":"kitchen"}
)",
          kSessions);
  EXPECT_EQ(a.load(), b.load());
}

TEST(LoadCorpus, RoundTripThroughWriteCorpus) {
  Files files(kTranscripts, kFrames, kSessions);
  const Corpus c = files.load();
  TempDir out("corpus-out");
  write_corpus(c, out.path(), R"({"_manifest":{"tool":"align"}})" "\n");
  const Corpus again = load_corpus(out / "transcripts.jsonl", out / "frames.jsonl", out / "sessions.jsonl");
  EXPECT_EQ(c, again);
}

TEST(SpeakerMap, DefaultTableIsCaseInsensitive) {
  SpeakerMap m;
  EXPECT_EQ(m.map("adult"), Speaker::Adult);
  EXPECT_EQ(m.map("FEM"), Speaker::Adult);
  EXPECT_EQ(m.map("Mal"), Speaker::Adult);
  EXPECT_EQ(m.map("chi"), Speaker::KeyChild);
  EXPECT_EQ(m.map("OCH"), Speaker::OtherChild);
  EXPECT_EQ(m.map("OTHER_CHILD"), Speaker::OtherChild);
  EXPECT_EQ(m.map("TVN"), Speaker::Unknown);
}

Corpus frame_grid_corpus(std::vector<std::int64_t> ts, Utterance u) {
  std::vector<FrameRef> fs;
  for (auto t : ts) {
    FrameRef f;
    f.frame_id = "f" + std::to_string(t);
    f.session_id = "s1";
    f.t_s = t;
    fs.push_back(f);
  }
  return Corpus({testing::session()}, {std::move(u)}, std::move(fs), {});
}

std::vector<std::int64_t> times(const std::vector<FrameRef>& fs) {
  std::vector<std::int64_t> out;
  for (const auto& f : fs) out.push_back(f.t_s);
  return out;
}

TEST(ConcurrentFrames, FloorStartToCeilEnd) {
  const Corpus c = frame_grid_corpus({2, 3, 4, 5, 6}, testing::utterance("u", 3.2, 4.1));
  EXPECT_EQ(times(concurrent_frames(c, c.utterances()[0])), (std::vector<std::int64_t>{3, 4, 5}));
}

TEST(ConcurrentFrames, BoundaryInclusion) {
  const Corpus c = frame_grid_corpus({2, 3, 4, 5}, testing::utterance("u", 3.0, 3.0 + 1e-9));
  EXPECT_EQ(times(concurrent_frames(c, c.utterances()[0])), (std::vector<std::int64_t>{3, 4}));
  const Corpus exact = frame_grid_corpus({3}, testing::utterance("u", 3.0, 3.0 + 1e-9));
  EXPECT_EQ(times(concurrent_frames(exact, exact.utterances()[0])), (std::vector<std::int64_t>{3}));
}

TEST(ConcurrentFrames, ClipsToAvailableFrames) {
  const Corpus c = frame_grid_corpus({0, 1, 2}, testing::utterance("u", 2.5, 4.0));
  EXPECT_EQ(times(concurrent_frames(c, c.utterances()[0])), (std::vector<std::int64_t>{2}));
  const Corpus none = frame_grid_corpus({0, 1}, testing::utterance("u", 5.5, 6.0));
  EXPECT_TRUE(concurrent_frames(none, none.utterances()[0]).empty());
}

TEST(ConcurrentFrames, NeverCrossesSessions) {
  std::vector<FrameRef> fs = testing::frames("s1", 10);
  auto other = testing::frames("s2", 10);
  fs.insert(fs.end(), other.begin(), other.end());
  const Corpus c({testing::session("s1"), testing::session("s2")},
                 {testing::utterance("u", 2.2, 5.5, Speaker::Adult, "s2")}, fs, {});
  for (const auto& f : concurrent_frames(c, c.utterances()[0])) EXPECT_EQ(f.session_id, "s2");
}

}  // namespace
}  // namespace align
