#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "align/error.hpp"
#include "align/rng.hpp"
#include "align/stats.hpp"

namespace align::stats {

double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw TooFewObservations("quantile of an empty sample");
  const double h = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  if (sorted[lo] == sorted[hi]) return sorted[lo];
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double mean(std::span<const double> values) {
  if (values.empty()) throw TooFewObservations("mean of an empty sample");
  // Shifted accumulation: exact for constant samples.
  const double origin = values.front();
  double acc = 0.0;
  for (double v : values) acc += v - origin;
  return origin + acc / static_cast<double>(values.size());
}

Interval bootstrap_ci_indices(std::size_t n, int replicates, std::uint64_t seed,
                              const std::function<double(std::span<const std::size_t>)>& statistic,
                              unsigned threads) {
  if (n < 2) throw TooFewObservations("bootstrap needs at least 2 observations");
  if (replicates < 1) throw ConfigError("bootstrap replicates must be positive");
  std::vector<double> stats(static_cast<std::size_t>(replicates));
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> idx(n);
    for (std::size_t b = begin; b < end; ++b) {
      Rng rng(derive_seed(seed, b));
      for (auto& i : idx) i = static_cast<std::size_t>(rng.below(n));
      stats[b] = statistic(idx);
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    work(0, stats.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (stats.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(stats.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }
  std::sort(stats.begin(), stats.end());
  return {quantile_sorted(stats, 0.025), quantile_sorted(stats, 0.975)};
}

Interval bootstrap_ci(std::span<const double> values, int replicates, std::uint64_t seed,
                      const Statistic& statistic, unsigned threads) {
  return bootstrap_ci_indices(
      values.size(), replicates, seed,
      [&](std::span<const std::size_t> idx) {
        std::vector<double> sample(idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i) sample[i] = values[idx[i]];
        return statistic(sample);
      },
      threads);
}

Correlation pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw FormulaMismatch("pearson inputs differ in length");
  if (xs.size() < 3) throw TooFewObservations("pearson needs at least 3 pairs");
  const double mx = mean(xs);
  const double my = mean(ys);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw ZeroVariance("pearson input has zero variance");
  Correlation c;
  c.n = xs.size();
  c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  const double df = static_cast<double>(c.n - 2);
  if (std::abs(c.r) >= 1.0) {
    c.p_value = 0.0;
  } else {
    const double t = c.r * std::sqrt(df / (1.0 - c.r * c.r));
    c.p_value = student_t_two_sided_p(t, df);
  }
  return c;
}

std::vector<int> assign_bins(std::span<const double> xs, int n_bins, BinRule rule) {
  if (n_bins < 1) throw ConfigError("n_bins must be positive");
  std::vector<int> bins(xs.size(), 0);
  if (xs.empty()) return bins;
  if (rule == BinRule::EqualWidth) {
    const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
    const double width = (*hi - *lo) / n_bins;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      bins[i] = width > 0 ? std::clamp(static_cast<int>(std::floor((xs[i] - *lo) / width)), 0, n_bins - 1) : 0;
    }
  } else {
    std::vector<std::size_t> order(xs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
    for (std::size_t r = 0; r < order.size(); ++r) {
      bins[order[r]] = static_cast<int>(r * static_cast<std::size_t>(n_bins) / order.size());
    }
  }
  return bins;
}

std::vector<BinSummary> binned_means(std::span<const double> xs, std::span<const double> ys,
                                     int n_bins, BinRule rule, int replicates,
                                     std::uint64_t seed) {
  if (xs.size() != ys.size()) throw FormulaMismatch("binned_means inputs differ in length");
  const auto bins = assign_bins(xs, n_bins, rule);
  std::vector<std::vector<double>> bx(static_cast<std::size_t>(n_bins));
  std::vector<std::vector<double>> by(static_cast<std::size_t>(n_bins));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    bx[static_cast<std::size_t>(bins[i])].push_back(xs[i]);
    by[static_cast<std::size_t>(bins[i])].push_back(ys[i]);
  }
  std::vector<BinSummary> out;
  for (int b = 0; b < n_bins; ++b) {
    const auto& vx = bx[static_cast<std::size_t>(b)];
    const auto& vy = by[static_cast<std::size_t>(b)];
    if (vx.empty()) continue;
    BinSummary s;
    s.bin = b;
    s.x_lo = *std::min_element(vx.begin(), vx.end());
    s.x_hi = *std::max_element(vx.begin(), vx.end());
    s.n = vx.size();
    s.mean_x = mean(vx);
    s.mean_y = mean(vy);
    s.ci95 = vy.size() >= 2 ? bootstrap_ci(vy, replicates, derive_seed(seed, static_cast<std::uint64_t>(b)))
                            : Interval{s.mean_y, s.mean_y};
    out.push_back(s);
  }
  return out;
}

}  // namespace align::stats
