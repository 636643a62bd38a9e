#include <gtest/gtest.h>

#include <cmath>

#include "align/analysis.hpp"
#include "align/error.hpp"
#include "align/rng.hpp"
#include "support.hpp"

namespace align::analysis {
namespace {

std::vector<AccuracyRow> planted_rows(bool both, std::uint64_t seed) {
  Rng rng(seed);
  const AccuracyCurve curve{-4.625, 18.5, 0.0};
  std::vector<AccuracyRow> rows;
  for (int i = 0; i < 400; ++i) {
    const double s = rng.uniform(0.1, 0.4);
    for (Condition c : {Condition::Image, Condition::Utterance}) {
      if (!both && c == Condition::Utterance) continue;
      AccuracyRow r;
      r.trial_id = std::string(c == Condition::Image ? "img-" : "utt-") + std::to_string(i);
      r.condition = c;
      r.utterance_id = "u" + std::to_string(i);
      r.clip_score = s;
      r.n = 6;
      for (int j = 0; j < 6; ++j) r.k += rng.bernoulli(curve(s));
      r.accuracy = r.k / 6.0;
      rows.push_back(r);
    }
  }
  return rows;
}

TEST(ValidationRows, TermsFollowConditionsPresent) {
  const auto both = validation_rows(planted_rows(true, 1));
  EXPECT_EQ(both.design.names, (std::vector<std::string>{"(Intercept)", "score", "condition", "score:condition"}));
  EXPECT_EQ(both.design.x.rows(), 800);
  EXPECT_EQ(both.trials.sum(), 4800.0);
  const auto one = validation_rows(planted_rows(false, 1));
  EXPECT_EQ(one.design.names, (std::vector<std::string>{"(Intercept)", "score"}));
  EXPECT_EQ(condition_code(Condition::Image), 0.0);
  EXPECT_EQ(condition_code(Condition::Utterance), 1.0);
}

TEST(ValidationAnalysis, CrossingPointsDecilesAndCorrelation) {
  const auto a = validation_analysis(planted_rows(true, 2), 200, 3);
  ASSERT_EQ(a.curves.size(), 2u);
  for (const auto& c : a.curves) {
    ASSERT_TRUE(c.crossing_point);
    EXPECT_NEAR(*c.crossing_point, 0.25, 0.02);
    EXPECT_EQ(c.deciles.size(), 10u);
    for (std::size_t i = 1; i < c.deciles.size(); ++i) EXPECT_LE(c.deciles[i - 1].mean_x, c.deciles[i].mean_x);
  }
  ASSERT_TRUE(a.cross_condition);
  EXPECT_GT(a.cross_condition->r, 0.3);
  EXPECT_EQ(a.n_trials, 800u);
  EXPECT_EQ(a.n_responses, 4800u);
  const auto j = to_json(a);
  EXPECT_EQ(j["curves"].size(), 2u);
  EXPECT_TRUE(j.contains("cross_condition_pearson"));
  EXPECT_EQ(j["logistic"]["coefficients"].size(), 4u);
}

Corpus two_children() {
  std::vector<Session> sessions{testing::session("s1", "c1", 12.0), testing::session("s2", "c2", 30.0)};
  std::vector<Utterance> us{
      testing::utterance("a1", 1, 2, Speaker::Adult, "s1"),      testing::utterance("a2", 3, 5, Speaker::Adult, "s1"),
      testing::utterance("k1", 6, 7, Speaker::KeyChild, "s1"),   testing::utterance("o1", 8, 9, Speaker::OtherChild, "s1"),
      testing::utterance("x1", 10, 11, Speaker::Unknown, "s1"),  testing::utterance("a3", 1, 4, Speaker::Adult, "s2"),
      testing::utterance("k2", 5, 6, Speaker::KeyChild, "s2")};
  return Corpus(sessions, us, {}, {});
}

AlignmentRecord rec(std::string id, double score) {
  AlignmentRecord r;
  r.utterance_id = std::move(id);
  r.max_score = score;
  r.is_high = score >= 0.24;
  return r;
}

TEST(SpeakerRows, PoolsChildrenAndDropsUnknown) {
  const auto c = two_children();
  const std::vector<AlignmentRecord> rs{rec("a1", 0.3), rec("a2", 0.1), rec("k1", 0.3), rec("o1", 0.1),
                                        rec("x1", 0.9), rec("a3", 0.3), rec("k2", 0.1)};
  const auto rows = speaker_rows(c, rs);
  ASSERT_EQ(rows.clusters, (std::vector<std::string>{"c1", "c1", "c2", "c2"}));
  EXPECT_EQ(rows.data.design.names, (std::vector<std::string>{"(Intercept)", "speaker_adult", "age_months"}));
  // (c1, child), (c1, adult), (c2, child), (c2, adult)
  EXPECT_EQ(rows.data.y(0), 0.5);
  EXPECT_EQ(rows.data.y(1), 0.5);
  EXPECT_EQ(rows.data.y(2), 0.0);
  EXPECT_EQ(rows.data.y(3), 1.0);
  EXPECT_EQ(rows.data.design.x(3, 2), 30.0);
}

TEST(DurationRows, InteractionColumn) {
  const auto c = two_children();
  const std::vector<AlignmentRecord> rs{rec("a2", 0.2), rec("a3", 0.25)};
  const auto rows = duration_rows(c, rs);
  EXPECT_EQ(rows.data.design.names.back(), "duration_s:age_months");
  EXPECT_EQ(rows.data.design.x(0, 3), 2.0 * 12.0);
  EXPECT_EQ(rows.data.design.x(1, 3), 3.0 * 30.0);
  EXPECT_THROW(duration_rows(c, std::span<const AlignmentRecord>{}), TooFewObservations);
}

TEST(Reports, JsonShapes) {
  const auto rows = validation_rows(planted_rows(false, 4));
  const auto j = to_json(stats::fit_logistic(rows));
  EXPECT_EQ(j["family"], "binomial");
  EXPECT_EQ(j["coefficients"][1]["term"], "score");
  EXPECT_TRUE(j["coefficients"][1]["ci95"].is_array() || j["coefficients"][1]["ci95"].is_object());
  EXPECT_FALSE(kClusterNote.empty());
}

}  // namespace
}  // namespace align::analysis
