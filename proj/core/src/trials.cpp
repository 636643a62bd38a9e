#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "align/error.hpp"
#include "align/rng.hpp"
#include "align/study.hpp"

namespace align {

std::string_view to_string(Condition condition) {
  return condition == Condition::Image ? "image" : "utterance";
}

Condition parse_condition(std::string_view name) {
  if (name == "image") return Condition::Image;
  if (name == "utterance") return Condition::Utterance;
  throw ConfigError("unknown condition '" + std::string(name) + "'");
}

int Trial::correct_option() const noexcept {
  return is_catch && catch_payload ? catch_payload->answer_index : 0;
}

int Trial::correct_position() const noexcept {
  const int target = correct_option();
  for (int p = 0; p < 4; ++p) {
    if (presented_order[static_cast<std::size_t>(p)] == target) return p;
  }
  return -1;
}

bool Trial::is_correct(int choice_index) const noexcept {
  if (choice_index < 0 || choice_index > 3) return false;
  return presented_order[static_cast<std::size_t>(choice_index)] == correct_option();
}

const std::string& Trial::option_at(int position) const {
  const int option = presented_order.at(static_cast<std::size_t>(position));
  if (is_catch && catch_payload) return catch_payload->options[static_cast<std::size_t>(option)];
  if (option == 0) return condition == Condition::Image ? target_frame_id : target_utterance_id;
  return distractor_ids[static_cast<std::size_t>(option - 1)];
}

namespace {

std::string trial_id(Condition condition, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s-%05zu", condition == Condition::Image ? "img" : "utt", index);
  return buf;
}

}  // namespace

std::vector<Trial> generate_trials(std::span<const SampledPair> pairs, Condition condition,
                                   std::uint64_t seed) {
  if (pairs.size() < 4) {
    throw InsufficientPool("4AFC trials need at least 4 sampled pairs, got " +
                           std::to_string(pairs.size()));
  }
  auto id_of = [condition](const SampledPair& p) -> const std::string& {
    return condition == Condition::Image ? p.frame_id : p.utterance_id;
  };
  std::vector<std::string> pool;
  {
    std::set<std::string> unique;
    for (const auto& p : pairs) unique.insert(id_of(p));
    pool.assign(unique.begin(), unique.end());
  }
  if (pool.size() < 4) {
    throw InsufficientPool("4AFC trials need at least 4 distinct " +
                           std::string(condition == Condition::Image ? "frames" : "utterances"));
  }

  Rng rng(derive_seed(seed, condition == Condition::Image ? 1 : 2));
  std::vector<Trial> trials;
  trials.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    Trial t;
    t.trial_id = trial_id(condition, i);
    t.condition = condition;
    t.target_utterance_id = pairs[i].utterance_id;
    t.target_frame_id = pairs[i].frame_id;
    const std::string& target = id_of(pairs[i]);
    std::size_t filled = 0;
    while (filled < 3) {
      const std::string& candidate = pool[static_cast<std::size_t>(rng.below(pool.size()))];
      if (candidate == target) continue;
      if (std::find(t.distractor_ids.begin(), t.distractor_ids.begin() + filled, candidate) !=
          t.distractor_ids.begin() + filled) {
        continue;
      }
      t.distractor_ids[filled++] = candidate;
    }
    rng.shuffle(std::span<int>(t.presented_order));
    trials.push_back(std::move(t));
  }
  return trials;
}

std::span<const CatchPayload> default_catch_bank() {
  static const std::vector<CatchPayload> bank{
      {"Which of these is an animal?", {"dog", "spoon", "chair", "shoe"}, 0},
      {"Which of these can you drink?", {"book", "milk", "sock", "door"}, 1},
      {"Which of these is a color?", {"table", "carrot", "red", "pillow"}, 2},
      {"Which of these is a fruit?", {"car", "hat", "lamp", "banana"}, 3},
      {"Which of these do you wear on your feet?", {"shoes", "plate", "cloud", "bird"}, 0},
      {"Which of these is a number?", {"green", "seven", "window", "bread"}, 1},
      {"Which of these can fly?", {"rock", "fork", "bird", "carpet"}, 2},
      {"Which of these is a body part?", {"bucket", "train", "pencil", "hand"}, 3},
      {"Which of these is a vehicle?", {"truck", "apple", "blanket", "cup"}, 0},
      {"Which of these do you sleep in?", {"sandwich", "bed", "river", "glove"}, 1},
      {"Which of these is cold?", {"fire", "sun", "ice", "oven"}, 2},
      {"Which of these is a toy?", {"onion", "ladder", "stapler", "ball"}, 3},
  };
  return bank;
}

std::array<double, 4> softmax4(const std::array<double, 4>& scores, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("softmax temperature must be positive");
  const double top = *std::max_element(scores.begin(), scores.end());
  std::array<double, 4> probs{};
  double total = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    probs[i] = std::exp((scores[i] - top) / temperature);
    total += probs[i];
  }
  for (double& p : probs) p /= total;
  return probs;
}

ModelChoice model_4afc(const Trial& trial, const EmbeddingStore& text_store,
                       const EmbeddingStore& image_store, double temperature) {
  if (trial.is_catch) throw ConfigError("model_4afc does not score catch trials");
  const bool image_condition = trial.condition == Condition::Image;
  const EmbeddingStore& fixed_store = image_condition ? text_store : image_store;
  const EmbeddingStore& option_store = image_condition ? image_store : text_store;
  const std::string& fixed_id = image_condition ? trial.target_utterance_id : trial.target_frame_id;
  const EmbeddingVector* fixed = fixed_store.find(fixed_id);
  if (fixed == nullptr) throw MissingEmbedding("no embedding for '" + fixed_id + "'");

  ModelChoice choice;
  choice.trial_id = trial.trial_id;
  for (int p = 0; p < 4; ++p) {
    const std::string& id = trial.option_at(p);
    const EmbeddingVector* option = option_store.find(id);
    if (option == nullptr) throw MissingEmbedding("no embedding for '" + id + "'");
    choice.scores[static_cast<std::size_t>(p)] = cosine(*fixed, *option);
  }
  choice.probs = softmax4(choice.scores, temperature);
  choice.chosen_index = static_cast<int>(argmax_first(choice.scores));
  choice.correct = trial.is_correct(choice.chosen_index);
  return choice;
}

}  // namespace align
