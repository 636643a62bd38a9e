#include <gtest/gtest.h>

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "align/error.hpp"
#include "align/study.hpp"
#include "support.hpp"

namespace align {
namespace {

// One utterance per second; utterance i's argmax frame is s1-f<i>.
struct Pool {
  Corpus corpus;
  std::vector<AlignmentRecord> records;

  Pool(const std::vector<double>& scores, const std::vector<std::optional<std::string>>& activity = {}) {
    const int n = static_cast<int>(scores.size());
    std::vector<Utterance> us;
    auto fs = testing::frames("s1", n + 1);
    for (int i = 0; i < n; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "u%04d", i);
      us.push_back(testing::utterance(id, i + 0.1, i + 0.5));
      if (i < static_cast<int>(activity.size())) fs[static_cast<std::size_t>(i)].activity = activity[static_cast<std::size_t>(i)];
      AlignmentRecord r;
      r.utterance_id = id;
      r.max_score = scores[static_cast<std::size_t>(i)];
      r.argmax_frame = "s1-f" + std::to_string(i);
      r.frame_scores = {{r.argmax_frame, r.max_score}};
      r.n_frames = 1;
      r.is_high = r.max_score >= 0.24;
      records.push_back(r);
    }
    LabelVocab vocab;
    for (const auto& a : activity) {
      if (a) vocab.activities.insert(*a);
    }
    corpus = Corpus({testing::session("s1", "c1", 20.0, n + 10.0)}, us, fs, vocab);
  }
};

std::vector<double> evenly(int n, double lo = 0.0, double hi = 1.0) {
  std::vector<double> out;
  for (int i = 0; i < n; ++i) out.push_back(lo + (hi - lo) * i / (n - 1));
  return out;
}

TEST(ScoreBin, EqualWidthWithTopEdgeInLastBin) {
  EXPECT_EQ(score_bin(0.0, 0.0, 1.0, 5), 0);
  EXPECT_EQ(score_bin(0.19, 0.0, 1.0, 5), 0);
  EXPECT_EQ(score_bin(0.21, 0.0, 1.0, 5), 1);
  EXPECT_EQ(score_bin(1.0, 0.0, 1.0, 5), 4);
  EXPECT_EQ(score_bin(0.3, 0.3, 0.3, 5), 0);
}

TEST(Sampler, SaturatedCapsGiveEightyPerBin) {
  Pool pool(evenly(800));
  const auto report = stratified_sample(pool.records, pool.corpus, {});
  EXPECT_EQ(report.pairs.size(), 400u);
  for (std::size_t b = 0; b < 5; ++b) {
    EXPECT_EQ(report.bin_pool[b], 160u);
    EXPECT_EQ(report.bin_phase1[b], 80u);
  }
  for (const auto& p : report.pairs) EXPECT_EQ(p.frame_id, "s1-f" + std::to_string(std::stoi(p.utterance_id.substr(1))));
}

TEST(Sampler, SmallBinTakenWhole) {
  // 12 candidates in the lowest bin, the rest at the top.
  std::vector<double> scores(12, 0.0);
  for (int i = 0; i < 200; ++i) scores.push_back(0.9 + 0.1 * i / 199.0);
  Pool pool(scores);
  const auto report = stratified_sample(pool.records, pool.corpus, {});
  EXPECT_EQ(report.bin_phase1[0], 12u);
  EXPECT_EQ(report.bin_phase1[4], 80u);
  EXPECT_EQ(report.pairs.size(), 92u);
  EXPECT_TRUE(std::is_sorted(report.pairs.begin(), report.pairs.end(), [](const auto& a, const auto& b) {
    return std::tie(a.bin, a.utterance_id) < std::tie(b.bin, b.utterance_id);
  }));
}

TEST(Sampler, LabelTopUpReachesMinimumOrExhaustsPool) {
  // 1000 candidates; a rare activity on 15 of them and a scarce one on 4.
  std::vector<std::optional<std::string>> activity(1000);
  for (int i = 0; i < 15; ++i) activity[static_cast<std::size_t>(i * 60)] = "bathing";
  for (int i = 0; i < 4; ++i) activity[static_cast<std::size_t>(i * 60 + 30)] = "reading";
  Pool pool(evenly(1000), activity);
  SamplerConfig config;
  config.per_bin_cap = 10;
  config.seed = 9;
  const auto report = stratified_sample(pool.records, pool.corpus, config);
  EXPECT_GE(report.activity_counts.at("bathing"), 10u);
  EXPECT_EQ(report.activity_counts.at("reading"), 4u);
  std::set<std::string> ids;
  for (const auto& p : report.pairs) EXPECT_TRUE(ids.insert(p.utterance_id).second);
  const auto n_top_up = std::count_if(report.pairs.begin(), report.pairs.end(), [](const auto& p) { return p.top_up; });
  EXPECT_EQ(report.pairs.size(), 50u + static_cast<std::size_t>(n_top_up));
}

TEST(Sampler, DeterministicAndOrderIndependent) {
  Pool pool(evenly(500));
  SamplerConfig config;
  config.seed = 4;
  const auto a = stratified_sample(pool.records, pool.corpus, config);
  auto reversed = pool.records;
  std::reverse(reversed.begin(), reversed.end());
  const auto b = stratified_sample(reversed, pool.corpus, config);
  EXPECT_EQ(a.pairs, b.pairs);
  config.seed = 5;
  EXPECT_NE(stratified_sample(pool.records, pool.corpus, config).pairs, a.pairs);
}

TEST(Sampler, EmptyPoolAndBadConfig) {
  Pool pool(evenly(10));
  EXPECT_THROW(stratified_sample(std::span<const AlignmentRecord>{}, pool.corpus, {}), EmptyPool);
  SamplerConfig bad;
  bad.per_bin_cap = 0;
  EXPECT_THROW(stratified_sample(pool.records, pool.corpus, bad), ConfigError);
}

std::vector<SampledPair> pairs(int n) {
  std::vector<SampledPair> out;
  for (int i = 0; i < n; ++i) {
    out.push_back({"u" + std::to_string(i), "f" + std::to_string(i), i % 5, i / double(n), false});
  }
  return out;
}

TEST(Trials, FourPairsUseTheOtherThreeAsDistractors) {
  const auto ps = pairs(4);
  for (Condition c : {Condition::Image, Condition::Utterance}) {
    const auto trials = generate_trials(ps, c, 1);
    ASSERT_EQ(trials.size(), 4u);
    for (std::size_t i = 0; i < 4; ++i) {
      std::set<std::string> got(trials[i].distractor_ids.begin(), trials[i].distractor_ids.end());
      std::set<std::string> want;
      for (std::size_t j = 0; j < 4; ++j) {
        if (j != i) want.insert(c == Condition::Image ? ps[j].frame_id : ps[j].utterance_id);
      }
      EXPECT_EQ(got, want);
    }
  }
}

TEST(Trials, SevenThirtyTwoPairsDistinctAndDeterministic) {
  const auto ps = pairs(732);
  for (Condition c : {Condition::Image, Condition::Utterance}) {
    const auto trials = generate_trials(ps, c, 77);
    ASSERT_EQ(trials.size(), 732u);
    std::set<std::string> ids;
    for (const auto& t : trials) {
      EXPECT_TRUE(ids.insert(t.trial_id).second);
      const std::string& target = c == Condition::Image ? t.target_frame_id : t.target_utterance_id;
      std::set<std::string> options(t.distractor_ids.begin(), t.distractor_ids.end());
      options.insert(target);
      EXPECT_EQ(options.size(), 4u);
      auto order = t.presented_order;
      std::sort(order.begin(), order.end());
      EXPECT_EQ(order, (std::array<int, 4>{0, 1, 2, 3}));
      EXPECT_EQ(t.option_at(t.correct_position()), target);
    }
    EXPECT_EQ(trials, generate_trials(ps, c, 77));
  }
}

TEST(Trials, InsufficientPool) {
  EXPECT_THROW(generate_trials(pairs(3), Condition::Image, 1), InsufficientPool);
  auto ps = pairs(4);
  ps[3].frame_id = ps[0].frame_id;
  EXPECT_THROW(generate_trials(ps, Condition::Image, 1), InsufficientPool);
  EXPECT_NO_THROW(generate_trials(ps, Condition::Utterance, 1));
}

TEST(Trials, CorrectnessFollowsPresentedOrder) {
  Trial t;
  t.presented_order = {2, 0, 3, 1};
  EXPECT_EQ(t.correct_position(), 1);
  EXPECT_TRUE(t.is_correct(1));
  EXPECT_FALSE(t.is_correct(0));
  t.is_catch = true;
  t.catch_payload = default_catch_bank()[0];  // answer option 0
  EXPECT_TRUE(t.is_correct(1));
  EXPECT_EQ(t.option_at(1), "dog");
}

TEST(Softmax, IndependentRecomputation) {
  // exp-normalised values computed offline at 30 digits.
  const auto p = softmax4({0.3, 0.1, 0.1, 0.1}, 1.0);
  EXPECT_NEAR(p[0], 0.2893357559401649, 1e-15);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(p[static_cast<std::size_t>(i)], 0.23688808135327837, 1e-15);
  const auto q = softmax4({0.3, 0.1, 0.1, 0.1}, 0.5);
  EXPECT_NEAR(q[0], 0.33211997307567492, 1e-15);
  EXPECT_NEAR(q[1], 0.22262667564144169, 1e-15);
  EXPECT_NEAR(std::accumulate(q.begin(), q.end(), 0.0), 1.0, 1e-12);
  EXPECT_THROW(softmax4({0, 0, 0, 0}, 0.0), ConfigError);
}

TEST(Softmax, StableForLargeInputs) {
  const auto p = softmax4({1000.0, 999.0, -1000.0, 0.0}, 0.01);
  EXPECT_NEAR(p[0], 1.0, 1e-12);
  EXPECT_GE(p[2], 0.0);
}

struct ModelFixture {
  EmbeddingStore text{EmbeddingKind::Text, 2};
  EmbeddingStore image{EmbeddingKind::Image, 2};
  Trial trial;

  // Cosines with the utterance vector (1, 0): f0 .. f3 set by angle.
  explicit ModelFixture(std::array<double, 4> cosines) {
    text.insert("u0", EmbeddingVector({1.0, 0.0}));
    for (int i = 0; i < 4; ++i) {
      const double c = cosines[static_cast<std::size_t>(i)];
      image.insert("f" + std::to_string(i), EmbeddingVector({c, std::sqrt(1.0 - c * c)}));
    }
    trial.trial_id = "t";
    trial.condition = Condition::Image;
    trial.target_utterance_id = "u0";
    trial.target_frame_id = "f0";
    trial.distractor_ids = {"f1", "f2", "f3"};
  }
};

TEST(Model4afc, PicksHighestCosine) {
  ModelFixture m({0.3, 0.1, 0.1, 0.1});
  const auto choice = model_4afc(m.trial, m.text, m.image);
  EXPECT_TRUE(choice.correct);
  EXPECT_NEAR(choice.scores[0], 0.3, 1e-12);
  EXPECT_NEAR(choice.probs[0], 0.2893357559401649, 1e-12);
  m.trial.presented_order = {3, 2, 0, 1};
  const auto moved = model_4afc(m.trial, m.text, m.image);
  EXPECT_EQ(moved.chosen_index, 2);
  EXPECT_TRUE(moved.correct);
}

TEST(Model4afc, TieGoesToLowestPositionAndAveragesChance) {
  ModelFixture m({0.2, 0.2, 0.2, 0.2});
  std::array<int, 4> order{0, 1, 2, 3};
  int correct = 0, total = 0;
  do {
    m.trial.presented_order = order;
    const auto choice = model_4afc(m.trial, m.text, m.image);
    EXPECT_EQ(choice.chosen_index, 0);
    correct += choice.correct;
    ++total;
  } while (std::next_permutation(order.begin(), order.end()));
  EXPECT_EQ(total, 24);
  EXPECT_EQ(correct, 6);
}

TEST(Model4afc, UtteranceConditionAndMissingEmbeddings) {
  EmbeddingStore text(EmbeddingKind::Text, 2), image(EmbeddingKind::Image, 2);
  image.insert("f0", EmbeddingVector({1.0, 0.0}));
  text.insert("u0", EmbeddingVector({0.6, 0.8}));
  text.insert("u1", EmbeddingVector({0.8, 0.6}));
  text.insert("u2", EmbeddingVector({0.0, 1.0}));
  Trial t;
  t.condition = Condition::Utterance;
  t.target_utterance_id = "u0";
  t.target_frame_id = "f0";
  t.distractor_ids = {"u1", "u2", "u3"};
  EXPECT_THROW(model_4afc(t, text, image), MissingEmbedding);
  text.insert("u3", EmbeddingVector({-1.0, 0.0}));
  const auto choice = model_4afc(t, text, image);
  EXPECT_FALSE(choice.correct);
  EXPECT_EQ(choice.chosen_index, 1);
}

std::vector<Trial> both_conditions(int n) {
  const auto ps = pairs(n);
  auto trials = generate_trials(ps, Condition::Image, 3);
  const auto utt = generate_trials(ps, Condition::Utterance, 3);
  trials.insert(trials.end(), utt.begin(), utt.end());
  return trials;
}

TEST(Assignment, FullScaleMeanNearTarget) {
  const auto trials = both_conditions(732);
  const auto a = assign_trials(trials, 80, {}, 11);
  std::size_t total = 0;
  std::map<std::string, int> uses;
  for (const auto& s : a.slots) {
    total += s.n_test;
    std::set<std::string> distinct;
    int catches = 0;
    for (const auto& id : s.items) {
      if (a.find_catch(id) != nullptr) {
        ++catches;
        continue;
      }
      EXPECT_TRUE(distinct.insert(id).second);
      ++uses[id];
    }
    EXPECT_EQ(catches, 5);
    EXPECT_EQ(distinct.size(), s.n_test);
  }
  EXPECT_EQ(total, 2u * 732u * 6u);
  const double mean = static_cast<double>(total) / 80.0;
  EXPECT_NEAR(mean, 110.0, 5.0);
  EXPECT_EQ(uses.size(), trials.size());
  for (const auto& [id, n] : uses) EXPECT_EQ(n, 6) << id;
  const auto [lo, hi] = std::minmax_element(a.slots.begin(), a.slots.end(),
                                            [](const auto& x, const auto& y) { return x.n_test < y.n_test; });
  EXPECT_LE(hi->n_test - lo->n_test, 1u);
}

TEST(Assignment, FourByFourSingleAnnotation) {
  const auto trials = generate_trials(pairs(4), Condition::Image, 1);
  StudyConfig config;
  config.annotations_per_trial_target = 1;
  const auto a = assign_trials(trials, 4, config, 2);
  ASSERT_EQ(a.slots.size(), 4u);
  for (const auto& s : a.slots) {
    EXPECT_EQ(s.n_test, 1u);
    EXPECT_EQ(s.items.size(), 6u);
  }
  EXPECT_EQ(a.catch_trials.size(), 20u);
  const auto again = assign_trials(trials, 4, config, 2);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(a.slots[i].items, again.slots[i].items);
}

TEST(Assignment, Infeasible) {
  const auto trials = both_conditions(10);
  EXPECT_THROW(assign_trials(trials, 10, {}, 1), InfeasibleAssignment);  // 5 per condition < 6
  EXPECT_THROW(assign_trials(trials, 0, {}, 1), InfeasibleAssignment);
  EXPECT_NO_THROW(assign_trials(trials, 12, {}, 1));
}

Response catch_response(std::string annotator, bool correct) {
  Response r;
  r.annotator_id = std::move(annotator);
  r.trial_id = "catch";
  r.is_catch = true;
  r.correct = correct;
  return r;
}

TEST(Exclusions, MoreThanOneFailureExcludes) {
  std::vector<Response> rs{catch_response("a", false), catch_response("a", false), catch_response("a", true),
                           catch_response("b", false), catch_response("b", true), catch_response("c", true)};
  const auto ex = apply_exclusions(rs, {});
  EXPECT_EQ(ex.excluded_annotators, std::vector<std::string>{"a"});
  EXPECT_EQ(ex.kept_annotators, (std::vector<std::string>{"b", "c"}));
  EXPECT_EQ(ex.catch_failures.at("a"), 2);
  EXPECT_EQ(filter_kept(rs, ex).size(), 3u);
}

TEST(AccuracyTable, CountsAndCoverage) {
  const auto trials = generate_trials(pairs(5), Condition::Image, 1);
  std::vector<AlignmentRecord> records;
  for (const auto& p : pairs(5)) {
    AlignmentRecord r;
    r.utterance_id = p.utterance_id;
    r.max_score = p.score;
    records.push_back(r);
  }
  std::vector<Response> rs;
  for (int i = 0; i < 6; ++i) {
    Response r;
    r.response_id = "r" + std::to_string(i);
    r.annotator_id = "a" + std::to_string(i);
    r.trial_id = trials[1].trial_id;
    r.correct = i % 2 == 0;
    rs.push_back(r);
  }
  rs.push_back(catch_response("a0", false));
  const auto table = accuracy_table(rs, trials, records);
  ASSERT_EQ(table.rows.size(), 1u);
  EXPECT_EQ(table.rows[0].n, 6);
  EXPECT_EQ(table.rows[0].k, 3);
  EXPECT_EQ(table.rows[0].accuracy, 0.5);
  EXPECT_EQ(table.rows[0].clip_score, 0.2);
  EXPECT_EQ(table.uncovered_trials.size(), 4u);
  rs[0].trial_id = "nope";
  EXPECT_THROW(accuracy_table(rs, trials, records), OrphanResponse);
}

TEST(AccuracyCurve, FloorAndLogistic) {
  const AccuracyCurve c{0.0, 1.0, 0.25};
  EXPECT_DOUBLE_EQ(c(0.0), 0.25 + 0.75 * 0.5);
  EXPECT_NEAR(AccuracyCurve{}(0.25), 0.5, 1e-12);
}

TEST(Simulation, OneResponsePerItemAndInattentiveFailCatches) {
  const auto trials = both_conditions(40);
  std::vector<AlignmentRecord> records;
  for (const auto& p : pairs(40)) {
    AlignmentRecord r;
    r.utterance_id = p.utterance_id;
    r.max_score = p.score;
    records.push_back(r);
  }
  const auto a = assign_trials(trials, 12, {}, 5);
  SimulationConfig config;
  config.inattentive_slots = {3};
  config.inattentive_catch_accuracy = 0.0;
  config.seed = 8;
  const auto rs = simulate_annotators(a, trials, records, config);
  std::size_t items = 0;
  for (const auto& s : a.slots) items += s.items.size();
  EXPECT_EQ(rs.size(), items);
  for (const auto& r : rs) {
    EXPECT_GE(r.choice_index, 0);
    EXPECT_LT(r.choice_index, 4);
  }
  const auto ex = apply_exclusions(rs, {});
  EXPECT_EQ(ex.excluded_annotators, std::vector<std::string>{"sim-003"});
  EXPECT_EQ(simulate_annotators(a, trials, records, config), rs);
}

TEST(Serialization, TrialsResponsesAssignmentPairsRoundTrip) {
  testing::TempDir d;
  const auto trials = both_conditions(8);
  const auto a = assign_trials(trials, 12, {}, 5);
  std::vector<Trial> all = trials;
  all.insert(all.end(), a.catch_trials.begin(), a.catch_trials.end());
  {
    std::ostringstream out;
    write_trials_jsonl(out, all);
    testing::write_text(d / "t.jsonl", out.str());
    EXPECT_EQ(read_trials_jsonl(d / "t.jsonl"), all);
  }
  {
    std::vector<Response> rs(2);
    rs[0] = {"r1", "a", "img-00000", 2, true, false, 1234, "2026-01-01T00:00:00Z"};
    rs[1] = {"r2", "b", "catch-001-00", 0, false, true, std::nullopt, ""};
    std::ostringstream out;
    write_responses_jsonl(out, rs);
    testing::write_text(d / "r.jsonl", out.str());
    EXPECT_EQ(read_responses_jsonl(d / "r.jsonl"), rs);
    nlohmann::json wrapped{{"sequence", 1}, {"idempotency_key", "k"}, {"response", response_to_json(rs[0])}};
    EXPECT_EQ(response_from_json(wrapped), rs[0]);
  }
  {
    const auto back = assignment_from_json(assignment_to_json(a));
    ASSERT_EQ(back.slots.size(), a.slots.size());
    for (std::size_t i = 0; i < a.slots.size(); ++i) EXPECT_EQ(back.slots[i].items, a.slots[i].items);
    EXPECT_EQ(back.catch_trials, a.catch_trials);
  }
  {
    const auto ps = pairs(6);
    std::ostringstream out;
    write_pairs_jsonl(out, ps);
    testing::write_text(d / "p.jsonl", out.str());
    EXPECT_EQ(read_pairs_jsonl(d / "p.jsonl"), ps);
  }
}

}  // namespace
}  // namespace align
