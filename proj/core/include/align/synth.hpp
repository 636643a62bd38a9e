#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "align/corpus.hpp"
#include "align/embedding.hpp"

namespace align::synth {

/// Parameters of a planted synthetic corpus. Every utterance's score is
/// drawn from a range (high or low) so that the number of high-alignment
/// utterances per group is fixed exactly.
struct CorpusSpec {
  std::uint64_t seed = 1;
  std::size_t dim = 64;
  double shared_weight = 0.0;
  int n_children = 4;
  int sessions_per_child = 2;
  int utterances_per_session = 50;
  double min_age_months = 5.0;
  double max_age_months = 36.0;
  /// Fraction of utterances by adults; the remainder alternate KEY_CHILD and
  /// OTHER_CHILD.
  double adult_fraction = 0.75;
  /// Planted high-alignment rate per speaker class.
  double adult_high_rate = 0.16;
  double child_high_rate = 0.08;
  double tau = 0.24;
  std::vector<std::string> activities{"eating", "playing", "reading", "bathing", "walking"};
  std::vector<std::string> locations{"kitchen", "living_room", "bedroom", "outside"};
  /// Lemma vocabulary for generated text.
  std::vector<std::string> words{"ball", "dog", "cup", "look", "here", "the", "want",
                                 "you", "book", "shoe", "milk", "car", "go", "big", "red"};
};

struct PlantedCorpus {
  Corpus corpus;
  FixtureProvider provider;
  /// utterance_id -> planted max cosine
  std::map<std::string, double> planted_max;
  std::size_t n_high = 0;

  EmbeddingStore text_store() const;
  EmbeddingStore image_store() const;
};

/// Builds the corpus and plants, per utterance, its concurrent frames'
/// cosines so the maximum lands in the high band [tau, tau + 0.2] for exactly
/// round(rate * n_class) utterances of each speaker class (adult, or any
/// child), and in
/// [tau - 0.2, tau - 0.01] for the rest.
PlantedCorpus make_corpus(const CorpusSpec& spec);

}  // namespace align::synth
