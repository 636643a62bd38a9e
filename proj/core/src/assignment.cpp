#include <algorithm>
#include <cstdio>
#include <numeric>

#include "align/error.hpp"
#include "align/rng.hpp"
#include "align/study.hpp"

namespace align {

void StudyConfig::validate() const {
  if (trials_per_annotator_target <= 0 || catch_trials_per_annotator <= 0 ||
      max_catch_failures < 0 || annotations_per_trial_target <= 0) {
    throw ConfigError("study targets must be positive");
  }
}

const Trial* Assignment::find_catch(std::string_view id) const {
  for (const auto& t : catch_trials) {
    if (t.trial_id == id) return &t;
  }
  return nullptr;
}

namespace {

std::string catch_id(int slot, int j) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "catch-%03d-%d", slot, j);
  return buf;
}

}  // namespace

Assignment assign_trials(std::span<const Trial> trials, int n_annotators, const StudyConfig& config,
                         std::uint64_t seed) {
  config.validate();
  if (n_annotators < 1) throw InfeasibleAssignment("at least one annotator is required");

  std::vector<Condition> present;
  for (Condition c : {Condition::Image, Condition::Utterance}) {
    if (std::any_of(trials.begin(), trials.end(),
                    [c](const Trial& t) { return !t.is_catch && t.condition == c; })) {
      present.push_back(c);
    }
  }
  if (present.empty()) throw InfeasibleAssignment("no test trials to assign");

  Assignment out;
  out.seed = seed;
  out.slots.resize(static_cast<std::size_t>(n_annotators));
  for (int s = 0; s < n_annotators; ++s) {
    out.slots[static_cast<std::size_t>(s)].slot = s;
    out.slots[static_cast<std::size_t>(s)].condition =
        present[static_cast<std::size_t>(s) % present.size()];
  }

  const auto k = static_cast<std::size_t>(config.annotations_per_trial_target);
  std::size_t total_test = 0;
  for (std::size_t ci = 0; ci < present.size(); ++ci) {
    const Condition c = present[ci];
    std::vector<const Trial*> pool;
    for (const auto& t : trials) {
      if (!t.is_catch && t.condition == c) pool.push_back(&t);
    }
    std::vector<AnnotatorSlot*> slots;
    for (auto& s : out.slots) {
      if (s.condition == c) slots.push_back(&s);
    }
    if (slots.size() < k) {
      throw InfeasibleAssignment(
          std::string(to_string(c)) + " condition has " + std::to_string(slots.size()) +
          " annotators but each trial needs " + std::to_string(k) + " distinct annotators (slack " +
          std::to_string(static_cast<long>(slots.size()) - static_cast<long>(k)) + ")");
    }
    // Every window of at most |pool| consecutive entries in the repeated
    // permutation holds distinct trials, so contiguous shares never repeat a
    // trial for one annotator and every trial is used exactly k times.
    Rng rng(derive_seed(seed, 100 + ci));
    std::vector<std::size_t> perm(pool.size());
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(std::span<std::size_t>(perm));
    const std::size_t total = pool.size() * k;
    const std::size_t base = total / slots.size();
    const std::size_t extra = total % slots.size();
    std::size_t cursor = 0;
    for (std::size_t j = 0; j < slots.size(); ++j) {
      const std::size_t share = base + (j < extra ? 1 : 0);
      for (std::size_t i = 0; i < share; ++i, ++cursor) {
        slots[j]->items.push_back(pool[perm[cursor % pool.size()]]->trial_id);
      }
      slots[j]->n_test = share;
    }
    out.mean_test_per_annotator[std::string(to_string(c))] =
        static_cast<double>(total) / static_cast<double>(slots.size());
    total_test += total;
  }
  out.target_slack = static_cast<double>(total_test) / n_annotators - config.trials_per_annotator_target;

  const auto bank = default_catch_bank();
  const auto n_catch = static_cast<std::size_t>(config.catch_trials_per_annotator);
  for (auto& slot : out.slots) {
    Rng rng(derive_seed(seed, 10000 + static_cast<std::uint64_t>(slot.slot)));
    rng.shuffle(std::span<std::string>(slot.items));

    std::vector<std::size_t> questions;
    while (questions.size() < n_catch) {
      for (std::size_t q : rng.sample_indices(bank.size(), std::min(bank.size(), n_catch - questions.size()))) {
        questions.push_back(q);
      }
    }
    std::vector<std::string> catch_ids;
    for (std::size_t j = 0; j < n_catch; ++j) {
      Trial t;
      t.trial_id = catch_id(slot.slot, static_cast<int>(j));
      t.condition = slot.condition;
      t.is_catch = true;
      t.catch_payload = bank[questions[j]];
      rng.shuffle(std::span<int>(t.presented_order));
      catch_ids.push_back(t.trial_id);
      out.catch_trials.push_back(std::move(t));
    }

    const std::size_t length = slot.items.size() + n_catch;
    auto positions = rng.sample_indices(length, n_catch);
    std::sort(positions.begin(), positions.end());
    std::vector<std::string> merged;
    merged.reserve(length);
    std::size_t next_test = 0;
    std::size_t next_catch = 0;
    for (std::size_t p = 0; p < length; ++p) {
      if (next_catch < positions.size() && positions[next_catch] == p) {
        merged.push_back(catch_ids[next_catch++]);
      } else {
        merged.push_back(slot.items[next_test++]);
      }
    }
    slot.items = std::move(merged);
  }
  return out;
}

}  // namespace align
