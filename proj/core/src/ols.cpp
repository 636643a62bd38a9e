#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <thread>

#include "align/error.hpp"
#include "align/rng.hpp"
#include "align/stats.hpp"

namespace align::stats {

std::size_t OlsFit::index_of(std::string_view name) const {
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].name == name) return i;
  }
  throw FormulaMismatch("fit has no term '" + std::string(name) + "'");
}

const Estimate& OlsFit::term(std::string_view name) const { return terms[index_of(name)]; }

OlsFit fit_ols(const RegressionData& data) {
  const auto& x = data.design.x;
  if (data.y.size() != x.rows()) throw FormulaMismatch("response length differs from design");
  require_full_rank(data.design);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  const Eigen::VectorXd beta = qr.solve(data.y);
  const Eigen::VectorXd residuals = data.y - x * beta;
  const double df = static_cast<double>(n - p);

  OlsFit fit;
  fit.n = static_cast<std::size_t>(n);
  fit.residual_variance = df > 0 ? residuals.squaredNorm() / df : 0.0;
  // (X'X)^-1 = P R^-1 R^-T P^T from the pivoted QR.
  const Eigen::MatrixXd r = qr.matrixR().topLeftCorner(p, p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const Eigen::MatrixXd perm = qr.colsPermutation();
  const Eigen::MatrixXd xtx_inv = perm * (r_inv * r_inv.transpose()) * perm.transpose();
  const double t_crit = df > 0 ? student_t_quantile(0.975, df) : kZ975;

  for (Eigen::Index j = 0; j < p; ++j) {
    Estimate e;
    e.name = data.design.names[static_cast<std::size_t>(j)];
    e.estimate = beta[j];
    e.variance = fit.residual_variance * xtx_inv(j, j);
    e.se = std::sqrt(e.variance);
    e.ci95 = {e.estimate - t_crit * e.se, e.estimate + t_crit * e.se};
    e.statistic = e.se > 0 ? e.estimate / e.se : 0.0;
    e.p_value = df > 0 && e.se > 0 ? student_t_two_sided_p(e.statistic, df) : 1.0;
    e.df = df;
    fit.terms.push_back(std::move(e));
  }
  return fit;
}

OlsFit fit_ols_clustered(const RegressionData& data, std::span<const std::string> cluster_ids,
                         int replicates, std::uint64_t seed, unsigned threads) {
  if (cluster_ids.size() != static_cast<std::size_t>(data.y.size())) {
    throw FormulaMismatch("cluster id count differs from row count");
  }
  if (replicates < 1) throw ConfigError("bootstrap replicates must be positive");
  OlsFit fit = fit_ols(data);

  // Per-cluster sufficient statistics; a resample sums them.
  std::map<std::string, std::size_t> cluster_index;
  for (const auto& c : cluster_ids) cluster_index.try_emplace(c, cluster_index.size());
  const std::size_t g = cluster_index.size();
  if (g < 2) throw SingleCluster("cluster bootstrap needs at least two clusters");
  // Map insertion order followed first appearance; renumber by sorted key so
  // the draw does not depend on row order.
  {
    std::size_t next = 0;
    for (auto& [_, idx] : cluster_index) idx = next++;
  }
  const auto& x = data.design.x;
  const Eigen::Index p = x.cols();
  std::vector<Eigen::MatrixXd> xtx(g, Eigen::MatrixXd::Zero(p, p));
  std::vector<Eigen::VectorXd> xty(g, Eigen::VectorXd::Zero(p));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const std::size_t c = cluster_index[cluster_ids[static_cast<std::size_t>(i)]];
    xtx[c].noalias() += x.row(i).transpose() * x.row(i);
    xty[c].noalias() += x.row(i).transpose() * data.y[i];
  }

  std::vector<std::optional<Eigen::VectorXd>> draws(static_cast<std::size_t>(replicates));
  auto work = [&](std::size_t begin, std::size_t end) {
    for (std::size_t b = begin; b < end; ++b) {
      Rng rng(derive_seed(seed, b));
      Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p, p);
      Eigen::VectorXd v = Eigen::VectorXd::Zero(p);
      for (std::size_t d = 0; d < g; ++d) {
        const auto c = static_cast<std::size_t>(rng.below(g));
        a += xtx[c];
        v += xty[c];
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
      lu.setThreshold(1e-12);
      if (lu.rank() < p) continue;
      draws[b] = lu.solve(v);
    }
  };
  threads = std::max(1u, threads);
  if (threads == 1) {
    work(0, draws.size());
  } else {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (draws.size() + threads - 1) / threads;
    for (unsigned t = 0; t < threads; ++t) {
      const std::size_t begin = t * chunk;
      const std::size_t end = std::min(draws.size(), begin + chunk);
      if (begin < end) pool.emplace_back(work, begin, end);
    }
  }

  fit.n_clusters = g;
  fit.replicates = replicates;
  fit.seed = seed;
  std::vector<std::vector<double>> per_term(static_cast<std::size_t>(p));
  for (const auto& d : draws) {
    if (!d) {
      ++fit.failed_replicates;
      continue;
    }
    for (Eigen::Index j = 0; j < p; ++j) per_term[static_cast<std::size_t>(j)].push_back((*d)[j]);
  }
  if (per_term.front().size() < 2) {
    throw RankError("fewer than two cluster resamples had a full-rank design");
  }
  for (auto& values : per_term) {
    std::sort(values.begin(), values.end());
    fit.cluster_bootstrap_ci95.push_back({quantile_sorted(values, 0.025), quantile_sorted(values, 0.975)});
    const double mu = mean(values);
    double ss = 0.0;
    for (double v : values) ss += (v - mu) * (v - mu);
    fit.bootstrap_se.push_back(std::sqrt(ss / static_cast<double>(values.size() - 1)));
  }
  return fit;
}

}  // namespace align::stats
