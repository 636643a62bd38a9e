#include "align/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "align/alignment.hpp"
#include "align/error.hpp"
#include "align/rng.hpp"

namespace align::synth {

namespace {

std::string format(const char* fmt, int a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, a);
  return buf;
}

std::vector<std::string> ids_of(std::span<const Utterance> us) {
  std::vector<std::string> ids;
  for (const auto& u : us) ids.push_back(u.utterance_id);
  return ids;
}

std::vector<std::string> ids_of(std::span<const FrameRef> fs) {
  std::vector<std::string> ids;
  for (const auto& f : fs) ids.push_back(f.frame_id);
  return ids;
}

}  // namespace

EmbeddingStore PlantedCorpus::text_store() const {
  const auto ids = ids_of(corpus.utterances());
  return provider.build(EmbeddingKind::Text, ids);
}

EmbeddingStore PlantedCorpus::image_store() const {
  const auto ids = ids_of(corpus.frames());
  return provider.build(EmbeddingKind::Image, ids);
}

PlantedCorpus make_corpus(const CorpusSpec& spec) {
  if (spec.n_children < 1 || spec.sessions_per_child < 1 || spec.utterances_per_session < 1) {
    throw ConfigError("synthetic corpus needs at least one child, session and utterance");
  }
  if (spec.words.empty() || spec.activities.empty() || spec.locations.empty()) {
    throw ConfigError("synthetic corpus needs non-empty word and label lists");
  }
  Rng layout(derive_seed(spec.seed, 11));

  std::vector<Session> sessions;
  std::vector<Utterance> utterances;
  std::vector<FrameRef> frames;
  for (int c = 0; c < spec.n_children; ++c) {
    const std::string child = format("child-%03d", c + 1);
    const double span = spec.max_age_months - spec.min_age_months;
    const double base_age = spec.min_age_months + layout.uniform() * span * 0.5;
    for (int s = 0; s < spec.sessions_per_child; ++s) {
      Session session;
      session.child_id = child;
      session.session_id = child + format("-s%02d", s + 1);
      const double step = spec.sessions_per_child > 1 ? span * 0.5 / (spec.sessions_per_child - 1) : 0.0;
      session.age_months = std::min(spec.max_age_months, base_age + step * s);

      std::int64_t t = 1;
      for (int k = 0; k < spec.utterances_per_session; ++k) {
        Utterance u;
        u.session_id = session.session_id;
        u.utterance_id = session.session_id + format("-u%04d", k + 1);
        u.start_s = static_cast<double>(t) + 0.2;
        u.end_s = u.start_s + layout.uniform(0.5, 3.5);
        const int n_words = 1 + static_cast<int>(layout.below(6));
        for (int w = 0; w < n_words; ++w) {
          if (w) u.text += ' ';
          u.text += spec.words[layout.below(spec.words.size())];
        }
        u.token_count = n_words;
        t = static_cast<std::int64_t>(std::ceil(u.end_s)) + 1;
        utterances.push_back(std::move(u));
      }
      session.duration_s = static_cast<double>(t + 1);

      std::string activity, location;
      for (std::int64_t f = 0; f <= t; ++f) {
        if (f % 30 == 0) {
          activity = spec.activities[layout.below(spec.activities.size())];
          location = spec.locations[layout.below(spec.locations.size())];
        }
        FrameRef frame;
        frame.session_id = session.session_id;
        frame.frame_id = session.session_id + format("-f%05d", static_cast<int>(f));
        frame.t_s = f;
        frame.activity = activity;
        frame.location = location;
        frames.push_back(std::move(frame));
      }
      sessions.push_back(std::move(session));
    }
  }

  // Speaker classes and planted high set, both fixed-size by construction.
  const std::size_t n = utterances.size();
  const auto n_adult = static_cast<std::size_t>(std::llround(spec.adult_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng speakers(derive_seed(spec.seed, 12));
  speakers.shuffle(std::span<std::size_t>(order));
  std::vector<std::size_t> adults(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(n_adult, n)));
  std::vector<std::size_t> children(order.begin() + static_cast<std::ptrdiff_t>(adults.size()), order.end());
  for (auto i : adults) utterances[i].speaker = Speaker::Adult;
  std::sort(children.begin(), children.end());
  for (std::size_t j = 0; j < children.size(); ++j) {
    utterances[children[j]].speaker = j % 2 == 0 ? Speaker::KeyChild : Speaker::OtherChild;
  }

  std::vector<bool> high(n, false);
  Rng chooser(derive_seed(spec.seed, 13));
  auto plant_class = [&](std::vector<std::size_t> members, double rate) {
    std::sort(members.begin(), members.end());
    chooser.shuffle(std::span<std::size_t>(members));
    const auto k = static_cast<std::size_t>(std::llround(rate * static_cast<double>(members.size())));
    for (std::size_t j = 0; j < k && j < members.size(); ++j) high[members[j]] = true;
    return k;
  };
  std::size_t n_high = plant_class(adults, spec.adult_high_rate);
  n_high += plant_class(children, spec.child_high_rate);

  std::map<std::string, bool> is_high;
  for (std::size_t i = 0; i < n; ++i) is_high[utterances[i].utterance_id] = high[i];

  Corpus corpus(std::move(sessions), std::move(utterances), std::move(frames), LabelVocab{
      std::set<std::string>(spec.activities.begin(), spec.activities.end()),
      std::set<std::string>(spec.locations.begin(), spec.locations.end())});

  PlantedCorpus out{std::move(corpus), FixtureProvider(spec.seed, spec.dim, spec.shared_weight), {}, n_high};
  Rng scores(derive_seed(spec.seed, 14));
  for (const auto& u : out.corpus.utterances()) {
    const double top = is_high[u.utterance_id] ? scores.uniform(spec.tau, spec.tau + 0.2)
                                               : scores.uniform(spec.tau - 0.2, spec.tau - 0.01);
    const auto window = concurrent_frames(out.corpus, u);
    if (window.empty()) continue;
    const std::size_t peak = scores.below(window.size());
    for (std::size_t j = 0; j < window.size(); ++j) {
      const double c = j == peak ? top : top - scores.uniform(0.02, 0.15);
      out.provider.plant(window[j].frame_id, u.utterance_id, c);
    }
    out.planted_max[u.utterance_id] = top;
  }
  return out;
}

}  // namespace align::synth
