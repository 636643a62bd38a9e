#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "align/error.hpp"
#include "align/rng.hpp"
#include "align/stats.hpp"

namespace align::stats {
namespace {

DataTable table(std::vector<std::pair<std::string, std::vector<double>>> cols) {
  DataTable t;
  for (auto& [name, values] : cols) t.add_column(name, std::move(values));
  return t;
}

BinomialData binomial(const DataTable& t, std::vector<std::string> terms, std::vector<double> k,
                      std::vector<double> n) {
  BinomialData d;
  d.design = build_design(t, terms);
  d.successes = Eigen::Map<Eigen::VectorXd>(k.data(), static_cast<Eigen::Index>(k.size()));
  d.trials = Eigen::Map<Eigen::VectorXd>(n.data(), static_cast<Eigen::Index>(n.size()));
  return d;
}

TEST(Design, InterceptInteractionsAndMismatch) {
  const auto t = table({{"a", {1, 2, 3}}, {"b", {0, 1, 1}}});
  const std::vector<std::string> terms{"a", "b", "a:b"};
  const auto d = build_design(t, terms);
  ASSERT_EQ(d.names, (std::vector<std::string>{"(Intercept)", "a", "b", "a:b"}));
  EXPECT_EQ(d.x(2, 3), 3.0);
  EXPECT_EQ(d.x(0, 0), 1.0);
  const std::vector<std::string> bad{"c"};
  EXPECT_THROW(build_design(t, bad), FormulaMismatch);
}

TEST(Design, RankErrorNamesOffendingColumns) {
  const auto t = table({{"a", {1, 2, 3, 4}}, {"k", {5, 5, 5, 5}}, {"twice_a", {2, 4, 6, 8}}});
  const std::vector<std::string> constant{"a", "k"};
  try {
    require_full_rank(build_design(t, constant));
    FAIL();
  } catch (const RankError& e) {
    EXPECT_NE(std::string(e.what()).find("constant predictor columns: k"), std::string::npos);
  }
  const std::vector<std::string> dependent{"a", "twice_a"};
  try {
    require_full_rank(build_design(t, dependent));
    FAIL();
  } catch (const RankError& e) {
    EXPECT_NE(std::string(e.what()).find("dependent columns: "), std::string::npos);
  }
}

TEST(Logistic, NullSlopeWithinTwoStandardErrors) {
  std::vector<double> x, k, n;
  for (int i = 0; i < 40; ++i) {
    x.push_back((i * 7919 % 40) / 40.0);
    k.push_back(5);
    n.push_back(10);
  }
  const auto fit = fit_logistic(binomial(table({{"x", x}}), {"x"}, k, n));
  EXPECT_TRUE(fit.converged);
  EXPECT_LT(std::abs(fit.term("x").estimate), 2 * fit.term("x").se);
  EXPECT_NEAR(fit.term("(Intercept)").estimate + fit.term("x").estimate * 0.5, 0.0, 1e-6);
}

TEST(Logistic, RecoversPlantedCurve) {
  Rng rng(2024);
  std::vector<double> x, y, ones;
  for (int i = 0; i < 5000; ++i) {
    const double s = rng.uniform(0.1, 0.4);
    x.push_back(s);
    y.push_back(rng.bernoulli(1.0 / (1.0 + std::exp(-(-4.625 + 18.5 * s)))) ? 1.0 : 0.0);
    ones.push_back(1.0);
  }
  const auto fit = fit_logistic(binomial(table({{"score", x}}), {"score"}, y, ones));
  ASSERT_TRUE(fit.converged);
  const auto& b1 = fit.term("score");
  EXPECT_LT(std::abs(b1.estimate - 18.5), 3 * b1.se);
  EXPECT_NEAR(b1.ci95.lo, b1.estimate - kZ975 * b1.se, 1e-12);
  EXPECT_NEAR(b1.ci95.hi, b1.estimate + kZ975 * b1.se, 1e-12);
  EXPECT_NEAR(b1.p_value, normal_two_sided_p(b1.estimate / b1.se), 1e-15);
  for (std::size_t i = 1; i < fit.deviance_trace.size(); ++i) {
    EXPECT_LE(fit.deviance_trace[i], fit.deviance_trace[i - 1] + 1e-9);
  }
  const double s = crossing_point(fit, {});
  const std::array<double, 2> row{1.0, s};
  EXPECT_LT(std::abs(fit.predict(row) - 0.5), 1e-9);
  EXPECT_NEAR(s, 0.25, 0.01);
}

TEST(Logistic, SeparationConvergesUnderRidge) {
  const std::vector<double> x{0, 1, 2, 3, 4, 5}, y{0, 0, 0, 1, 1, 1}, n(6, 1.0);
  const auto fit = fit_logistic(binomial(table({{"x", x}}), {"x"}, y, n));
  EXPECT_TRUE(fit.separation);
  EXPECT_TRUE(std::isfinite(fit.term("x").estimate));
  EXPECT_GT(fit.term("x").estimate, 0.0);
}

TEST(Logistic, RankDeficientDesignThrows) {
  const std::vector<double> x{1, 2, 3, 4}, y{0, 1, 0, 1}, n(4, 1.0);
  EXPECT_THROW(fit_logistic(binomial(table({{"x", x}, {"x2", {2, 4, 6, 8}}}), {"x", "x2"}, y, n)), RankError);
}

GlmFit glm(std::vector<std::pair<std::string, double>> coefs) {
  GlmFit f;
  for (auto& [name, value] : coefs) {
    Estimate e;
    e.name = name;
    e.estimate = value;
    f.terms.push_back(e);
  }
  return f;
}

TEST(CrossingPoint, AlgebraAndDegenerateSlope) {
  EXPECT_DOUBLE_EQ(crossing_point(glm({{"(Intercept)", -4.625}, {"score", 18.5}}), {}), 0.25);
  const auto with_condition = glm({{"(Intercept)", -4.625}, {"score", 18.5}, {"c", 0.5}, {"score:c", -2.0}});
  CrossingTerms terms;
  terms.condition = "c";
  terms.interaction = "score:c";
  EXPECT_DOUBLE_EQ(crossing_point(with_condition, terms, 1.0), 4.125 / 16.5);
  EXPECT_DOUBLE_EQ(crossing_point(with_condition, terms, 0.0), 0.25);
  EXPECT_THROW(crossing_point(glm({{"(Intercept)", -1.0}, {"score", 0.0}}), {}), DegenerateSlope);
}

TEST(Bootstrap, ConstantDeterministicAndTooFew) {
  const std::vector<double> c(50, 0.7);
  const auto ci = bootstrap_ci(c, 200, 1);
  EXPECT_EQ(ci.lo, 0.7);
  EXPECT_EQ(ci.hi, 0.7);
  std::vector<double> v;
  Rng rng(3);
  for (int i = 0; i < 100; ++i) v.push_back(rng.normal());
  EXPECT_EQ(bootstrap_ci(v, 500, 9), bootstrap_ci(v, 500, 9));
  EXPECT_EQ(bootstrap_ci(v, 500, 9), bootstrap_ci(v, 500, 9, mean, 4));
  EXPECT_NE(bootstrap_ci(v, 500, 9), bootstrap_ci(v, 500, 10));
  const std::vector<double> one{1.0};
  EXPECT_THROW(bootstrap_ci(one, 100, 1), TooFewObservations);
}

TEST(Bootstrap, BernoulliCoverageMetaSimulation) {
  int covered = 0;
  for (int rep = 0; rep < 100; ++rep) {
    Rng rng(derive_seed(555, static_cast<std::uint64_t>(rep)));
    std::vector<double> v;
    for (int i = 0; i < 1000; ++i) v.push_back(rng.bernoulli(0.5) ? 1.0 : 0.0);
    covered += bootstrap_ci(v, 1000, static_cast<std::uint64_t>(rep)).contains(0.5);
  }
  EXPECT_GE(covered, 93);
}

TEST(Quantile, LinearInterpolation) {
  const std::vector<double> s{1, 2, 3, 4};
  EXPECT_EQ(quantile_sorted(s, 0.0), 1.0);
  EXPECT_EQ(quantile_sorted(s, 1.0), 4.0);
  EXPECT_DOUBLE_EQ(quantile_sorted(s, 0.5), 2.5);
}

std::vector<double> one_to(int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 1.0);
  return v;
}

TEST(Pearson, PerfectAndHandTables) {
  const auto xs = one_to(10);
  std::vector<double> neg;
  for (double x : xs) neg.push_back(-x);
  EXPECT_NEAR(pearson(xs, xs).r, 1.0, 1e-15);
  EXPECT_NEAR(pearson(xs, neg).r, -1.0, 1e-15);
  // Reference values from 40-digit arithmetic.
  const std::vector<double> ys{2.1, 3.9, 6.2, 7.8, 10.1, 12.2, 13.8, 16.5, 17.9, 20.3};
  EXPECT_NEAR(pearson(xs, ys).r, 0.99934606386588757458, 1e-12);
  const std::vector<double> zs{3.1, 1.2, 4.8, 2.2, 5.9, 3.3, 2.8, 6.1, 4.0, 5.2};
  const auto c = pearson(xs, zs);
  EXPECT_NEAR(c.r, 0.49954123330825372447, 1e-12);
  EXPECT_NEAR(c.p_value, 0.14153704330719235879, 1e-10);
  EXPECT_EQ(c.n, 10u);
}

TEST(Pearson, Errors) {
  const std::vector<double> a{1, 2, 3}, k{2, 2, 2}, two{1, 2};
  EXPECT_THROW(pearson(a, k), ZeroVariance);
  EXPECT_THROW(pearson(two, two), TooFewObservations);
  EXPECT_ANY_THROW(pearson(a, two));
}

TEST(Distributions, ReferenceValues) {
  EXPECT_NEAR(normal_two_sided_p(1.959963984540054), 0.05, 1e-12);
  EXPECT_NEAR(student_t_two_sided_p(1.630996309963099631, 8), 0.14153704330719235879, 1e-10);
  EXPECT_NEAR(student_t_quantile(0.975, 10), 2.2281388519649385, 1e-9);
}

RegressionData regression(const DataTable& t, std::vector<std::string> terms, std::vector<double> y) {
  RegressionData d;
  d.design = build_design(t, terms);
  d.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  return d;
}

TEST(Ols, TextbookFixture) {
  const auto fit = fit_ols(regression(table({{"x", one_to(5)}}), {"x"}, {2, 4, 5, 4, 5}));
  EXPECT_NEAR(fit.term("x").estimate, 0.6, 1e-12);
  EXPECT_NEAR(fit.term("(Intercept)").estimate, 2.2, 1e-12);
  EXPECT_NEAR(fit.residual_variance, 0.8, 1e-12);
  EXPECT_NEAR(fit.term("x").se, std::sqrt(0.08), 1e-12);
  EXPECT_NEAR(fit.term("(Intercept)").se, std::sqrt(0.88), 1e-12);
  EXPECT_EQ(fit.term("x").df, 3.0);
  EXPECT_NEAR(fit.term("x").ci95.hi - fit.term("x").estimate, student_t_quantile(0.975, 3) * std::sqrt(0.08), 1e-9);
}

TEST(Ols, ClusterBootstrapRecoversPlantedEffect) {
  Rng rng(71);
  std::vector<double> x, y;
  std::vector<std::string> clusters;
  for (int c = 0; c < 30; ++c) {
    const double child = rng.normal(0.0, 0.02);
    for (int i = 0; i < 20; ++i) {
      const double xi = i % 2;
      x.push_back(xi);
      y.push_back(0.15 + 0.039 * xi + child + rng.normal(0.0, 0.02));
      clusters.push_back("child-" + std::to_string(c));
    }
  }
  const auto data = regression(table({{"adult", x}}), {"adult"}, y);
  const auto fit = fit_ols_clustered(data, clusters, 500, 4);
  const auto j = fit.index_of("adult");
  EXPECT_TRUE(fit.cluster_bootstrap_ci95[j].contains(0.039));
  EXPECT_EQ(fit.n_clusters, 30u);
  EXPECT_EQ(fit.replicates, 500);
  const auto parallel = fit_ols_clustered(data, clusters, 500, 4, 3);
  EXPECT_EQ(parallel.cluster_bootstrap_ci95, fit.cluster_bootstrap_ci95);
  const std::vector<std::string> one(clusters.size(), "only");
  EXPECT_THROW(fit_ols_clustered(data, one, 100, 1), SingleCluster);
}

TEST(Pmm, IdentityNearestDonorAndDeterminism) {
  const auto complete = table({{"x", {1, 2, 3, 4, 5}}, {"y", {2, 4, 6, 8, 10}}});
  ImputationConfig config;
  for (const auto& t : impute_pmm(complete, config)) EXPECT_EQ(t, complete);

  const auto missing = table({{"x", {1, 2, 3.4, 4, 5}}, {"y", {2, 4, NAN, 8, 10}}});
  config.k_donors = 1;
  const auto out = impute_pmm(missing, config);
  ASSERT_EQ(out.size(), 5u);
  for (const auto& t : out) EXPECT_EQ(t.column("y")[2], 8.0);

  const auto noisy = table({{"x", {1, 2, 3, 4, 5, 6, 7, 8}}, {"y", {1, NAN, 2, 5, NAN, 3, 9, 7}}});
  config.k_donors = 3;
  config.seed = 12;
  EXPECT_EQ(impute_pmm(noisy, config), impute_pmm(noisy, config));
  config.k_donors = 7;
  EXPECT_THROW(impute_pmm(noisy, config), TooFewDonors);
}

std::vector<Estimate> single(double estimate, double variance) {
  Estimate e;
  e.name = "b";
  e.estimate = estimate;
  e.variance = variance;
  e.se = std::sqrt(variance);
  return {e};
}

TEST(Rubin, ArithmeticAndIdentity) {
  const std::vector<std::vector<Estimate>> two{single(1.0, 0.0), single(2.0, 0.0)};
  const auto pooled = pool_rubin(two);
  EXPECT_EQ(pooled.term("b").estimate, 1.5);
  EXPECT_DOUBLE_EQ(pooled.term("b").between, 0.5);
  EXPECT_DOUBLE_EQ(pooled.term("b").total, 0.75);

  const std::vector<std::vector<Estimate>> same(5, single(0.3, 0.04));
  const auto id = pool_rubin(same);
  EXPECT_DOUBLE_EQ(id.term("b").estimate, 0.3);
  EXPECT_EQ(id.term("b").between, 0.0);
  EXPECT_DOUBLE_EQ(id.term("b").se, 0.2);

  auto renamed = single(1.0, 0.1);
  renamed[0].name = "c";
  const std::vector<std::vector<Estimate>> mismatch{single(1.0, 0.1), renamed};
  EXPECT_THROW(pool_rubin(mismatch), FormulaMismatch);
  const std::vector<std::vector<Estimate>> lone{single(1.0, 0.1)};
  EXPECT_THROW(pool_rubin(lone), TooFewObservations);
}

TEST(BinnedMeans, EqualWidthAndQuantile) {
  const std::vector<double> xs{0.0, 0.1, 0.2, 0.3, 0.9, 1.0}, ys{1, 1, 0, 0, 1, 0};
  const auto eq = binned_means(xs, ys, 2, BinRule::EqualWidth, 100, 1);
  ASSERT_EQ(eq.size(), 2u);
  EXPECT_EQ(eq[0].n, 4u);
  EXPECT_DOUBLE_EQ(eq[0].mean_y, 0.5);
  EXPECT_EQ(eq[1].n, 2u);
  const auto q = binned_means(xs, ys, 3, BinRule::Quantile, 100, 1);
  ASSERT_EQ(q.size(), 3u);
  for (const auto& b : q) EXPECT_EQ(b.n, 2u);
  EXPECT_DOUBLE_EQ(q[0].mean_y, 1.0);
  EXPECT_EQ(assign_bins(xs, 3, BinRule::Quantile), (std::vector<int>{0, 0, 1, 1, 2, 2}));
}

}  // namespace
}  // namespace align::stats
