#include <gtest/gtest.h>

#include <sstream>

#include <boost/multiprecision/cpp_dec_float.hpp>

#include "align/alignment.hpp"
#include "align/error.hpp"
#include "align/synth.hpp"
#include "support.hpp"

namespace align {
namespace {

// Frames f0..f9 in session s1 and one probe direction per frame.
struct Planted {
  Corpus corpus;
  EmbeddingStore text{EmbeddingKind::Text, 64};
  EmbeddingStore image{EmbeddingKind::Image, 64};

  Planted(std::vector<Utterance> utterances, const std::map<std::string, std::vector<double>>& scores) {
    corpus = Corpus({testing::session()}, std::move(utterances), testing::frames("s1", 10), {});
    FixtureProvider p(17, 64);
    for (const auto& [uid, cs] : scores) {
      const auto window = concurrent_frames(corpus, *corpus.find_utterance(uid));
      for (std::size_t i = 0; i < window.size() && i < cs.size(); ++i) p.plant(window[i].frame_id, uid, cs[i]);
    }
    for (const auto& u : corpus.utterances()) text.insert(u.utterance_id, p.text_vector(u.utterance_id));
    for (const auto& f : corpus.frames()) image.insert(f.frame_id, p.image_vector(f.frame_id));
  }
  EmbeddingStores stores() const { return {text, image}; }
};

TEST(Cosine, IdentityOrthogonalAndDimMismatch) {
  EmbeddingVector a({0.6, 0.8}), b({-0.8, 0.6}), c({1.0, 0.0, 0.0});
  EXPECT_EQ(cosine(a, a), 1.0);
  EXPECT_NEAR(cosine(a, b), 0.0, 1e-15);
  EXPECT_THROW(cosine(a, c), DimMismatch);
}

TEST(Cosine, ClampedToUnitInterval) {
  const double x = 1.0 / std::sqrt(3.0);
  EmbeddingVector v({x, x, x});
  const double c = cosine(v, v);
  EXPECT_LE(c, 1.0);
  EXPECT_GE(c, 1.0 - 1e-15);
}

TEST(Cosine, MatchesFiftyDigitOracle) {
  using Big = boost::multiprecision::cpp_dec_float_50;
  FixtureProvider p(99, 512);
  for (int i = 0; i < 20; ++i) {
    const auto u = p.text_vector("u" + std::to_string(i));
    const auto v = p.image_vector("f" + std::to_string(i));
    Big dot = 0, nu = 0, nv = 0;
    for (std::size_t k = 0; k < 512; ++k) {
      const Big a = u.values()[k], b = v.values()[k];
      dot += a * b;
      nu += a * a;
      nv += b * b;
    }
    const double oracle = static_cast<double>(dot / sqrt(nu * nv));
    EXPECT_NEAR(cosine(u, v), oracle, 1e-12);
  }
}

TEST(ArgmaxFirst, TiesGoToEarliest) {
  const std::vector<double> s{0.1, 0.3, 0.3, 0.2};
  EXPECT_EQ(argmax_first(s), 1u);
}

TEST(ScoreUtterance, MaxOfPlantedFrameScores) {
  Planted p({testing::utterance("u", 2.2, 3.9)}, {{"u", {0.10, 0.50, 0.20}}});
  const auto r = score_utterance(p.corpus, p.stores(), {}, p.corpus.utterances()[0]);
  ASSERT_EQ(r.frame_scores.size(), 3u);
  EXPECT_NEAR(r.max_score, 0.50, 1e-6);
  EXPECT_EQ(r.argmax_frame, "s1-f3");
  EXPECT_TRUE(r.is_high);
  EXPECT_EQ(r.n_frames, 3u);
}

TEST(ScoreUtterance, ThresholdIsInclusive) {
  Planted p({testing::utterance("hi", 1.5, 1.8), testing::utterance("lo", 4.5, 4.8)},
            {{"hi", {0.24, 0.1}}, {"lo", {0.2399999, 0.1}}});
  AnalysisConfig config;
  config.tau = 0.24;
  const auto hi = score_utterance(p.corpus, p.stores(), config, *p.corpus.find_utterance("hi"));
  const auto lo = score_utterance(p.corpus, p.stores(), config, *p.corpus.find_utterance("lo"));
  EXPECT_TRUE(hi.is_high) << hi.max_score;
  EXPECT_FALSE(lo.is_high) << lo.max_score;
}

TEST(ScoreUtterance, MissingFramesAndEmbeddings) {
  const Corpus c({testing::session()}, {testing::utterance("late", 50.2, 51.0), testing::utterance("u", 1.2, 1.8)},
                 testing::frames("s1", 10), {});
  EmbeddingStore text(EmbeddingKind::Text, 2), image(EmbeddingKind::Image, 2);
  text.insert("late", EmbeddingVector({1.0, 0.0}));
  EXPECT_THROW(score_utterance(c, {text, image}, {}, *c.find_utterance("late")), MissingFrames);
  try {
    score_utterance(c, {text, image}, {}, *c.find_utterance("u"));
    FAIL();
  } catch (const MissingEmbedding& e) {
    EXPECT_NE(std::string(e.what()).find("'u'"), std::string::npos);
  }
  text.insert("u", EmbeddingVector({1.0, 0.0}));
  try {
    score_utterance(c, {text, image}, {}, *c.find_utterance("u"));
    FAIL();
  } catch (const MissingEmbedding& e) {
    EXPECT_NE(std::string(e.what()).find("s1-f1"), std::string::npos);
  }
}

TEST(ScoreCorpus, SkipsAndReportsMissingEmbeddings) {
  std::vector<Utterance> us;
  for (int i = 0; i < 10; ++i) us.push_back(testing::utterance("u" + std::to_string(i), i * 0.5, i * 0.5 + 0.3));
  const Corpus c({testing::session()}, us, testing::frames("s1", 10), {});
  FixtureProvider p(1, 16);
  EmbeddingStore text(EmbeddingKind::Text, 16), image(EmbeddingKind::Image, 16);
  for (const auto& u : c.utterances()) {
    if (u.utterance_id != "u3" && u.utterance_id != "u7") text.insert(u.utterance_id, p.text_vector(u.utterance_id));
  }
  for (const auto& f : c.frames()) image.insert(f.frame_id, p.image_vector(f.frame_id));
  const auto result = score_corpus(c, {text, image}, {});
  EXPECT_EQ(result.records.size(), 8u);
  ASSERT_EQ(result.skipped.size(), 2u);
  EXPECT_EQ(result.skipped[0].utterance_id, "u3");
  EXPECT_EQ(result.skipped[1].utterance_id, "u7");
  EXPECT_EQ(result.skipped[0].reason, "MissingEmbedding");
}

TEST(ScoreCorpus, SpeakerFilterAndParallelEquality) {
  synth::CorpusSpec spec;
  spec.seed = 3;
  const auto planted = synth::make_corpus(spec);
  const auto text = planted.text_store();
  const auto image = planted.image_store();
  const auto serial = score_corpus(planted.corpus, {text, image}, {});
  const auto parallel = score_corpus(planted.corpus, {text, image}, {}, std::nullopt, 4);
  std::ostringstream a, b;
  write_alignment_jsonl(a, serial.records, true);
  write_alignment_jsonl(b, parallel.records, true);
  EXPECT_EQ(a.str(), b.str());
  const auto adults = score_corpus(planted.corpus, {text, image}, {}, Speaker::Adult);
  ASSERT_FALSE(adults.records.empty());
  for (const auto& r : adults.records) {
    EXPECT_EQ(planted.corpus.find_utterance(r.utterance_id)->speaker, Speaker::Adult);
  }
}

TEST(ScoreCorpus, TwoOfSixteenAdultsHigh) {
  synth::CorpusSpec spec;
  spec.n_children = 1;
  spec.sessions_per_child = 1;
  spec.utterances_per_session = 16;
  spec.adult_fraction = 1.0;
  spec.adult_high_rate = 0.125;
  const auto planted = synth::make_corpus(spec);
  const auto text = planted.text_store();
  const auto image = planted.image_store();
  const auto result = score_corpus(planted.corpus, {text, image}, {});
  const auto rows = summarize(result.records, planted.corpus, {});
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].n_high, 2u);
  EXPECT_EQ(rows[0].prop_high, 0.125);
}

std::vector<AlignmentRecord> records_for(const Corpus& c, std::vector<std::pair<std::string, double>> scores,
                                         double tau = 0.24) {
  std::vector<AlignmentRecord> out;
  for (auto& [id, s] : scores) {
    AlignmentRecord r;
    r.utterance_id = id;
    r.max_score = s;
    r.is_high = s >= tau;
    r.n_frames = 1;
    r.argmax_frame = "f";
    out.push_back(r);
  }
  (void)c;
  return out;
}

TEST(Summarize, GroupsSortedAndExact) {
  const Corpus c({testing::session("s1", "c1", 13.0), testing::session("s2", "c2", 22.5)},
                 {testing::utterance("a", 1, 2, Speaker::Adult, "s1"), testing::utterance("b", 3, 4, Speaker::KeyChild, "s1"),
                  testing::utterance("c", 1, 2, Speaker::Adult, "s2"), testing::utterance("d", 3, 4, Speaker::Adult, "s2")},
                 {}, {});
  const auto recs = records_for(c, {{"a", 0.3}, {"b", 0.1}, {"c", 0.24}, {"d", 0.2}});
  const std::vector<GroupKey> by{GroupKey::AgeBin, GroupKey::Speaker};
  const auto rows = summarize(recs, c, by, 2);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(*rows[0].age_bin_months, 12);
  EXPECT_EQ(*rows[0].speaker, Speaker::Adult);
  EXPECT_EQ(rows[0].prop_high, 1.0);
  EXPECT_EQ(*rows[1].speaker, Speaker::KeyChild);
  EXPECT_EQ(rows[1].prop_high, 0.0);
  EXPECT_EQ(*rows[2].age_bin_months, 22);
  EXPECT_EQ(rows[2].n_utterances, 2u);
  EXPECT_EQ(rows[2].prop_high, 0.5);
  EXPECT_THROW(summarize(std::span<const AlignmentRecord>{}, c, by), EmptyGroupSet);
}

TEST(Summarize, AllHighMeansPropOneEverywhere) {
  const Corpus c({testing::session("s1", "c1"), testing::session("s2", "c2")},
                 {testing::utterance("a", 1, 2, Speaker::Adult, "s1"), testing::utterance("b", 1, 2, Speaker::OtherChild, "s2")},
                 {}, {});
  const auto recs = records_for(c, {{"a", 0.9}, {"b", 0.5}});
  const std::vector<GroupKey> by{GroupKey::Child};
  for (const auto& r : summarize(recs, c, by)) EXPECT_EQ(r.prop_high, 1.0);
}

TEST(AlignmentJsonl, RoundTripWithAndWithoutFrames) {
  Planted p({testing::utterance("u", 2.2, 3.9)}, {{"u", {0.10, 0.50, 0.20}}});
  const auto result = score_corpus(p.corpus, p.stores(), {});
  testing::TempDir d;
  for (bool per_frame : {false, true}) {
    std::ostringstream out;
    write_alignment_jsonl(out, result.records, per_frame);
    testing::write_text(d / "a.jsonl", out.str());
    const auto back = read_alignment_jsonl(d / "a.jsonl");
    ASSERT_EQ(back.size(), 1u);
    EXPECT_EQ(back[0].utterance_id, "u");
    EXPECT_EQ(back[0].max_score, result.records[0].max_score);
    EXPECT_EQ(back[0].n_frames, 3u);
    EXPECT_EQ(back[0].frame_scores.size(), per_frame ? 3u : 0u);
  }
}

}  // namespace
}  // namespace align
