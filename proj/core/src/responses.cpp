#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <set>
#include <unordered_map>

#include "align/error.hpp"
#include "align/io.hpp"
#include "align/rng.hpp"
#include "align/study.hpp"

namespace align {

ExclusionResult apply_exclusions(std::span<const Response> responses, const StudyConfig& config) {
  ExclusionResult out;
  std::set<std::string> annotators;
  for (const auto& r : responses) {
    annotators.insert(r.annotator_id);
    if (r.is_catch && !r.correct) ++out.catch_failures[r.annotator_id];
  }
  for (const auto& a : annotators) {
    auto it = out.catch_failures.find(a);
    const int failures = it == out.catch_failures.end() ? 0 : it->second;
    (failures > config.max_catch_failures ? out.excluded_annotators : out.kept_annotators).push_back(a);
  }
  return out;
}

std::vector<Response> filter_kept(std::span<const Response> responses,
                                  const ExclusionResult& exclusions) {
  const std::set<std::string_view> excluded(exclusions.excluded_annotators.begin(),
                                            exclusions.excluded_annotators.end());
  std::vector<Response> out;
  for (const auto& r : responses) {
    if (!excluded.contains(r.annotator_id)) out.push_back(r);
  }
  return out;
}

AccuracyTable accuracy_table(std::span<const Response> responses, std::span<const Trial> trials,
                             std::span<const AlignmentRecord> records) {
  std::unordered_map<std::string_view, std::size_t> trial_index;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    if (!trials[i].is_catch) trial_index.emplace(trials[i].trial_id, i);
  }
  std::unordered_map<std::string_view, double> score_of;
  for (const auto& r : records) score_of.emplace(r.utterance_id, r.max_score);

  std::vector<int> n(trials.size(), 0);
  std::vector<int> k(trials.size(), 0);
  for (const auto& r : responses) {
    if (r.is_catch) continue;
    auto it = trial_index.find(r.trial_id);
    if (it == trial_index.end()) {
      throw OrphanResponse("response '" + r.response_id + "' refers to unknown trial '" +
                           r.trial_id + "'");
    }
    ++n[it->second];
    k[it->second] += r.correct ? 1 : 0;
  }

  AccuracyTable table;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const Trial& t = trials[i];
    if (t.is_catch) continue;
    if (n[i] == 0) {
      table.uncovered_trials.push_back(t.trial_id);
      continue;
    }
    auto s = score_of.find(t.target_utterance_id);
    if (s == score_of.end()) {
      throw IntegrityError("trial '" + t.trial_id + "' target utterance '" + t.target_utterance_id +
                           "' has no alignment record");
    }
    table.rows.push_back({t.trial_id, t.condition, t.target_utterance_id, s->second, n[i], k[i],
                          static_cast<double>(k[i]) / n[i]});
  }
  return table;
}

double AccuracyCurve::operator()(double score) const noexcept {
  const double eta = b0 + b1 * score;
  return floor + (1.0 - floor) / (1.0 + std::exp(-eta));
}

std::vector<Response> simulate_annotators(const Assignment& assignment,
                                          std::span<const Trial> trials,
                                          std::span<const AlignmentRecord> records,
                                          const SimulationConfig& config) {
  std::unordered_map<std::string_view, const Trial*> by_id;
  for (const auto& t : trials) by_id.emplace(t.trial_id, &t);
  for (const auto& t : assignment.catch_trials) by_id.emplace(t.trial_id, &t);
  std::unordered_map<std::string_view, double> score_of;
  for (const auto& r : records) score_of.emplace(r.utterance_id, r.max_score);
  const std::set<int> inattentive(config.inattentive_slots.begin(), config.inattentive_slots.end());

  std::vector<Response> out;
  for (const auto& slot : assignment.slots) {
    char name[32];
    std::snprintf(name, sizeof name, "sim-%03d", slot.slot);
    const std::string annotator = name;
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(slot.slot)));
    for (std::size_t i = 0; i < slot.items.size(); ++i) {
      auto it = by_id.find(slot.items[i]);
      if (it == by_id.end()) throw IntegrityError("assigned trial '" + slot.items[i] + "' is unknown");
      const Trial& t = *it->second;
      double p;
      if (t.is_catch) {
        p = inattentive.contains(slot.slot) ? config.inattentive_catch_accuracy : config.catch_accuracy;
      } else {
        auto s = score_of.find(t.target_utterance_id);
        if (s == score_of.end()) {
          throw IntegrityError("no alignment record for '" + t.target_utterance_id + "'");
        }
        p = config.curve(s->second);
      }
      const bool correct = rng.bernoulli(p);
      const int target = t.correct_position();
      int choice = target;
      if (!correct) {
        choice = static_cast<int>(rng.below(3));
        if (choice >= target) ++choice;
      }
      Response r;
      r.response_id = annotator + "-" + std::to_string(i);
      r.annotator_id = annotator;
      r.trial_id = t.trial_id;
      r.choice_index = choice;
      r.correct = t.is_correct(choice);
      r.is_catch = t.is_catch;
      out.push_back(std::move(r));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

json trial_to_json(const Trial& t) {
  json j{{"trial_id", t.trial_id},
         {"condition", to_string(t.condition)},
         {"target_pair", {{"utterance_id", t.target_utterance_id}, {"frame_id", t.target_frame_id}}},
         {"distractor_ids", t.distractor_ids},
         {"presented_order", t.presented_order},
         {"is_catch", t.is_catch}};
  if (t.catch_payload) {
    j["catch_payload"] = {{"question", t.catch_payload->question},
                          {"options", t.catch_payload->options},
                          {"answer_index", t.catch_payload->answer_index}};
  }
  return j;
}

Trial trial_from_json(const json& j) {
  Trial t;
  t.trial_id = j.at("trial_id").get<std::string>();
  t.condition = parse_condition(j.at("condition").get<std::string>());
  if (j.contains("target_pair")) {
    t.target_utterance_id = j["target_pair"].value("utterance_id", "");
    t.target_frame_id = j["target_pair"].value("frame_id", "");
  }
  t.distractor_ids = j.at("distractor_ids").get<std::array<std::string, 3>>();
  t.presented_order = j.at("presented_order").get<std::array<int, 4>>();
  std::array<int, 4> sorted = t.presented_order;
  std::sort(sorted.begin(), sorted.end());
  if (sorted != std::array<int, 4>{0, 1, 2, 3}) {
    throw ParseError("trial '" + t.trial_id + "' presented_order is not a permutation of 0..3");
  }
  t.is_catch = j.value("is_catch", false);
  if (j.contains("catch_payload") && !j["catch_payload"].is_null()) {
    const auto& c = j["catch_payload"];
    t.catch_payload = CatchPayload{c.at("question").get<std::string>(),
                                   c.at("options").get<std::array<std::string, 4>>(),
                                   c.at("answer_index").get<int>()};
  }
  return t;
}

void write_trials_jsonl(std::ostream& out, std::span<const Trial> trials) {
  for (const auto& t : trials) out << trial_to_json(t).dump() << '\n';
}

std::vector<Trial> read_trials_jsonl(const std::filesystem::path& path) {
  std::vector<Trial> trials;
  read_jsonl(path, [&](const json& j, std::size_t line) {
    try {
      trials.push_back(trial_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(path.filename().string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return trials;
}

json response_to_json(const Response& r) {
  json j{{"response_id", r.response_id}, {"annotator_id", r.annotator_id},
         {"trial_id", r.trial_id},       {"choice_index", r.choice_index},
         {"correct", r.correct},         {"is_catch", r.is_catch},
         {"received_at", r.received_at}};
  j["rt_ms"] = r.rt_ms ? json(*r.rt_ms) : json(nullptr);
  return j;
}

Response response_from_json(const json& j) {
  // Service log lines wrap the response with a sequence number.
  const json& body = j.contains("response") ? j["response"] : j;
  Response r;
  r.response_id = body.at("response_id").get<std::string>();
  r.annotator_id = body.at("annotator_id").get<std::string>();
  r.trial_id = body.at("trial_id").get<std::string>();
  r.choice_index = body.at("choice_index").get<int>();
  r.correct = body.at("correct").get<bool>();
  r.is_catch = body.value("is_catch", false);
  if (body.contains("rt_ms") && !body["rt_ms"].is_null()) r.rt_ms = body["rt_ms"].get<std::int64_t>();
  r.received_at = body.value("received_at", "");
  return r;
}

void write_responses_jsonl(std::ostream& out, std::span<const Response> responses) {
  for (const auto& r : responses) out << response_to_json(r).dump() << '\n';
}

std::vector<Response> read_responses_jsonl(const std::filesystem::path& path) {
  std::vector<Response> responses;
  read_jsonl(path, [&](const json& j, std::size_t line) {
    try {
      responses.push_back(response_from_json(j));
    } catch (const json::exception& e) {
      throw ParseError(path.filename().string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return responses;
}

void write_pairs_jsonl(std::ostream& out, std::span<const SampledPair> pairs) {
  for (const auto& p : pairs) {
    json j{{"utterance_id", p.utterance_id}, {"frame_id", p.frame_id}, {"bin", p.bin},
           {"score", p.score},               {"top_up", p.top_up}};
    out << j.dump() << '\n';
  }
}

std::vector<SampledPair> read_pairs_jsonl(const std::filesystem::path& path) {
  std::vector<SampledPair> pairs;
  read_jsonl(path, [&](const json& j, std::size_t line) {
    try {
      pairs.push_back({j.at("utterance_id").get<std::string>(), j.at("frame_id").get<std::string>(),
                       j.at("bin").get<int>(), j.at("score").get<double>(), j.value("top_up", false)});
    } catch (const json::exception& e) {
      throw ParseError(path.filename().string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return pairs;
}

json assignment_to_json(const Assignment& a) {
  json slots = json::array();
  for (const auto& s : a.slots) {
    slots.push_back({{"slot", s.slot},
                     {"condition", to_string(s.condition)},
                     {"n_test", s.n_test},
                     {"items", s.items}});
  }
  json catches = json::array();
  for (const auto& t : a.catch_trials) catches.push_back(trial_to_json(t));
  return {{"seed", a.seed},
          {"annotator_slots", std::move(slots)},
          {"catch_trials", std::move(catches)},
          {"mean_test_per_annotator", a.mean_test_per_annotator},
          {"target_slack", a.target_slack}};
}

Assignment assignment_from_json(const json& j) {
  Assignment a;
  a.seed = j.value("seed", std::uint64_t{0});
  for (const auto& s : j.at("annotator_slots")) {
    AnnotatorSlot slot;
    slot.slot = s.at("slot").get<int>();
    slot.condition = parse_condition(s.at("condition").get<std::string>());
    slot.items = s.at("items").get<std::vector<std::string>>();
    slot.n_test = s.value("n_test", std::size_t{0});
    a.slots.push_back(std::move(slot));
  }
  for (const auto& t : j.at("catch_trials")) a.catch_trials.push_back(trial_from_json(t));
  if (j.contains("mean_test_per_annotator")) {
    a.mean_test_per_annotator = j["mean_test_per_annotator"].get<std::map<std::string, double>>();
  }
  a.target_slack = j.value("target_slack", 0.0);
  return a;
}

}  // namespace align
