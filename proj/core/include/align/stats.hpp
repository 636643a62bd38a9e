#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace align::stats {

inline constexpr double kZ975 = 1.959963984540054;

/// Named numeric columns; NaN marks a missing cell.
struct DataTable {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t index_of(std::string_view name) const;  // throws FormulaMismatch
  const std::vector<double>& column(std::string_view name) const { return columns[index_of(name)]; }
  void add_column(std::string name, std::vector<double> values);
  std::size_t missing_count(std::size_t column) const;

  bool operator==(const DataTable&) const = default;
};

/// Design matrix with an optional "(Intercept)" column followed by one column
/// per term. A term is a column name or an interaction "a:b[:c]".
struct Design {
  std::vector<std::string> names;
  Eigen::MatrixXd x;
};

inline constexpr std::string_view kIntercept = "(Intercept)";

Design build_design(const DataTable& table, std::span<const std::string> terms,
                    bool intercept = true);

/// Throws RankError listing the columns that are constant or linearly
/// dependent on earlier columns.
void require_full_rank(const Design& design);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double v) const noexcept { return lo <= v && v <= hi; }
  bool operator==(const Interval&) const = default;
};

/// One coefficient of a fitted model. `variance` is the diagonal of the
/// coefficient covariance and `se` is its square root.
struct Estimate {
  std::string name;
  double estimate = 0.0;
  double variance = 0.0;
  double se = 0.0;
  Interval ci95;
  double statistic = 0.0;  // z (GLM) or t (OLS)
  double p_value = 1.0;
  double df = std::numeric_limits<double>::infinity();  // reference distribution df
};

// ---------------------------------------------------------------------------
// Logistic regression

/// Binomial rows: `successes` of `trials` per row of `design.x`. Bernoulli
/// data has trials = 1.
struct BinomialData {
  Design design;
  Eigen::VectorXd successes;
  Eigen::VectorXd trials;
};

struct LogisticOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  double deviance_tolerance = 1e-10;
  double separation_eta = 30.0;
  double ridge = 1e-8;
};

struct GlmFit {
  std::vector<Estimate> terms;
  Eigen::MatrixXd covariance;
  bool converged = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  double deviance = 0.0;
  bool separation = false;  // ridge was applied after |eta| exceeded the threshold
  std::vector<double> deviance_trace;  // penalized deviance after each iteration

  const Estimate& term(std::string_view name) const;
  bool has_term(std::string_view name) const;
  /// Fitted probability for one design row (same column order as terms).
  double predict(std::span<const double> row) const;
};

/// Logit-link binomial GLM by iteratively reweighted least squares with step
/// halving, so the penalized deviance never increases between iterations.
/// Standard errors come from the inverse information matrix; p-values are
/// Wald z. Throws RankError for a rank-deficient design.
GlmFit fit_logistic(const BinomialData& data, const LogisticOptions& options = {});

struct CrossingTerms {
  std::string intercept{kIntercept};
  std::string score = "score";
  std::optional<std::string> condition;
  std::optional<std::string> interaction;
};

/// Score at which the fitted probability is 0.5 for `condition_value`.
/// Throws DegenerateSlope when the effective slope is below 1e-12.
double crossing_point(const GlmFit& fit, const CrossingTerms& terms, double condition_value = 0.0);

// ---------------------------------------------------------------------------
// Bootstrap

/// Linear-interpolation quantile of already sorted values.
double quantile_sorted(std::span<const double> sorted, double q);

using Statistic = std::function<double(std::span<const double>)>;

double mean(std::span<const double> values);

/// Percentile 2.5/97.5 interval of `statistic` over `replicates` resamples.
/// Replicate b draws from its own stream derive_seed(seed, b), so the
/// interval does not depend on `threads`. Throws TooFewObservations.
Interval bootstrap_ci(std::span<const double> values, int replicates = 1000,
                      std::uint64_t seed = 0, const Statistic& statistic = mean,
                      unsigned threads = 1);

/// Generic form: `statistic` receives the resampled row indices.
Interval bootstrap_ci_indices(std::size_t n, int replicates, std::uint64_t seed,
                              const std::function<double(std::span<const std::size_t>)>& statistic,
                              unsigned threads = 1);

// ---------------------------------------------------------------------------
// Correlation

struct Correlation {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// Sample Pearson r with a two-sided t-test on n - 2 degrees of freedom.
Correlation pearson(std::span<const double> xs, std::span<const double> ys);

// ---------------------------------------------------------------------------
// Ordinary least squares

struct RegressionData {
  Design design;
  Eigen::VectorXd y;
};

struct OlsFit {
  std::vector<Estimate> terms;  // classical SEs, t-test p-values
  double residual_variance = 0.0;
  std::size_t n = 0;

  // Filled by fit_ols_clustered.
  std::vector<Interval> cluster_bootstrap_ci95;
  std::vector<double> bootstrap_se;
  std::size_t n_clusters = 0;
  int replicates = 0;
  int failed_replicates = 0;  // resamples with a rank-deficient design
  std::uint64_t seed = 0;

  const Estimate& term(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
};

OlsFit fit_ols(const RegressionData& data);

/// OLS point estimates with percentile CIs from resampling whole clusters
/// with replacement. Throws SingleCluster with fewer than two clusters.
OlsFit fit_ols_clustered(const RegressionData& data, std::span<const std::string> cluster_ids,
                         int replicates, std::uint64_t seed, unsigned threads = 1);

// ---------------------------------------------------------------------------
// Multiple imputation

struct ImputationConfig {
  int m = 5;
  int k_donors = 5;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Predictive mean matching. Each incomplete column is regressed (OLS with
/// intercept) on the complete columns; every missing cell copies the observed
/// value of a donor drawn uniformly from the k_donors observed rows with the
/// nearest predictions. Returns `m` completed tables.
std::vector<DataTable> impute_pmm(const DataTable& table, const ImputationConfig& config);

struct PooledEstimate {
  std::string name;
  double estimate = 0.0;
  double within = 0.0;
  double between = 0.0;
  double total = 0.0;
  double se = 0.0;
  /// Barnard-Rubin degrees of freedom; the complete-data df when between == 0.
  double df = 0.0;
  Interval ci95;
  double p_value = 1.0;
};

struct PooledFit {
  std::vector<PooledEstimate> terms;
  int m = 0;

  const PooledEstimate& term(std::string_view name) const;
};

/// Rubin's rules. Throws FormulaMismatch when term names differ and
/// TooFewObservations for m < 2.
PooledFit pool_rubin(std::span<const std::vector<Estimate>> fits);
PooledFit pool_rubin(std::span<const OlsFit> fits);
PooledFit pool_rubin(std::span<const GlmFit> fits);

// ---------------------------------------------------------------------------
// Binned summaries (figure data)

enum class BinRule { EqualWidth, Quantile };

struct BinSummary {
  int bin = 0;
  double x_lo = 0.0;
  double x_hi = 0.0;
  std::size_t n = 0;
  double mean_x = 0.0;
  double mean_y = 0.0;
  Interval ci95;
};

/// Mean of `ys` within bins of `xs` with a bootstrap CI per bin; empty bins
/// are omitted. Quantile bins split the sorted xs into equal-count groups.
std::vector<BinSummary> binned_means(std::span<const double> xs, std::span<const double> ys,
                                     int n_bins, BinRule rule, int replicates,
                                     std::uint64_t seed);

/// Bin index of every x under `rule` (same rule as binned_means).
std::vector<int> assign_bins(std::span<const double> xs, int n_bins, BinRule rule);

double normal_two_sided_p(double z);
double student_t_two_sided_p(double t, double df);
double student_t_quantile(double p, double df);

}  // namespace align::stats
