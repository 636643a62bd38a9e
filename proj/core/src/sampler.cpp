#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "align/error.hpp"
#include "align/rng.hpp"
#include "align/study.hpp"

namespace align {

void SamplerConfig::validate() const {
  if (n_score_bins <= 0 || per_bin_cap <= 0 || per_activity_min <= 0 || per_location_min <= 0) {
    throw ConfigError("sampler counts must be positive");
  }
}

int score_bin(double score, double lo, double hi, int n_bins) noexcept {
  if (!(hi > lo)) return 0;
  const double width = (hi - lo) / n_bins;
  const int bin = static_cast<int>(std::floor((score - lo) / width));
  return std::clamp(bin, 0, n_bins - 1);
}

namespace {

struct Candidate {
  const AlignmentRecord* record;
  const FrameRef* frame;
  int bin;
};

}  // namespace

SampleReport stratified_sample(std::span<const AlignmentRecord> records, const Corpus& corpus,
                               const SamplerConfig& config) {
  config.validate();
  std::vector<Candidate> candidates;
  candidates.reserve(records.size());
  for (const auto& r : records) {
    if (r.argmax_frame.empty()) continue;
    candidates.push_back({&r, corpus.find_frame(r.argmax_frame), 0});
  }
  if (candidates.empty()) throw EmptyPool("no alignment records to sample from");
  // Canonical order makes the draw independent of the input record order.
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return a.record->utterance_id < b.record->utterance_id;
  });
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (candidates[i].record->utterance_id == candidates[i - 1].record->utterance_id) {
      throw IntegrityError("duplicate alignment record for '" +
                           candidates[i].record->utterance_id + "'");
    }
  }

  SampleReport report;
  auto [min_it, max_it] = std::minmax_element(
      candidates.begin(), candidates.end(),
      [](const Candidate& a, const Candidate& b) { return a.record->max_score < b.record->max_score; });
  report.bin_lo = min_it->record->max_score;
  report.bin_hi = max_it->record->max_score;

  const auto n_bins = static_cast<std::size_t>(config.n_score_bins);
  std::vector<std::vector<std::size_t>> by_bin(n_bins);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].bin =
        score_bin(candidates[i].record->max_score, report.bin_lo, report.bin_hi, config.n_score_bins);
    by_bin[static_cast<std::size_t>(candidates[i].bin)].push_back(i);
  }

  std::vector<char> selected(candidates.size(), 0);
  std::vector<char> top_up(candidates.size(), 0);
  report.bin_pool.resize(n_bins);
  report.bin_phase1.resize(n_bins);
  for (std::size_t b = 0; b < n_bins; ++b) {
    Rng rng(derive_seed(config.seed, b));
    const auto picks = rng.sample_indices(by_bin[b].size(), static_cast<std::size_t>(config.per_bin_cap));
    for (std::size_t p : picks) selected[by_bin[b][p]] = 1;
    report.bin_pool[b] = by_bin[b].size();
    report.bin_phase1[b] = picks.size();
  }

  auto top_up_label = [&](std::string_view family, const std::string& label, int minimum,
                          auto label_of) {
    std::size_t have = 0;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const FrameRef* f = candidates[i].frame;
      if (f == nullptr) continue;
      const auto& value = label_of(*f);
      if (!value || *value != label) continue;
      if (selected[i]) {
        ++have;
      } else {
        pool.push_back(i);
      }
    }
    if (have >= static_cast<std::size_t>(minimum)) return;
    Rng rng(hash_id(std::string(family) + ":" + label, config.seed));
    for (std::size_t p : rng.sample_indices(pool.size(), static_cast<std::size_t>(minimum) - have)) {
      selected[pool[p]] = 1;
      top_up[pool[p]] = 1;
    }
  };
  const auto& vocab = corpus.label_vocab();
  for (const auto& label : vocab.activities) {
    top_up_label("activity", label, config.per_activity_min,
                 [](const FrameRef& f) -> const std::optional<std::string>& { return f.activity; });
  }
  for (const auto& label : vocab.locations) {
    top_up_label("location", label, config.per_location_min,
                 [](const FrameRef& f) -> const std::optional<std::string>& { return f.location; });
  }

  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (!selected[i]) continue;
    const auto& c = candidates[i];
    report.pairs.push_back({c.record->utterance_id, c.record->argmax_frame, c.bin,
                            c.record->max_score, top_up[i] != 0});
    if (c.frame != nullptr) {
      if (c.frame->activity) ++report.activity_counts[*c.frame->activity];
      if (c.frame->location) ++report.location_counts[*c.frame->location];
    }
  }
  std::sort(report.pairs.begin(), report.pairs.end(), [](const SampledPair& a, const SampledPair& b) {
    return std::tie(a.bin, a.utterance_id) < std::tie(b.bin, b.utterance_id);
  });
  return report;
}

}  // namespace align
