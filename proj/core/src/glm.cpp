#include <algorithm>
#include <cmath>
#include <limits>

#include "align/error.hpp"
#include "align/stats.hpp"

namespace align::stats {

namespace {

double logistic(double eta) { return 1.0 / (1.0 + std::exp(-eta)); }

// Binomial deviance with 0*log(0) = 0.
double deviance(const Eigen::VectorXd& k, const Eigen::VectorXd& m, const Eigen::VectorXd& mu) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < k.size(); ++i) {
    const double fitted = m[i] * mu[i];
    const double fitted_fail = m[i] * (1.0 - mu[i]);
    if (k[i] > 0.0) d += k[i] * std::log(k[i] / fitted);
    if (m[i] - k[i] > 0.0) d += (m[i] - k[i]) * std::log((m[i] - k[i]) / fitted_fail);
  }
  return 2.0 * d;
}

Eigen::VectorXd mean_of(const Eigen::VectorXd& eta) {
  Eigen::VectorXd mu(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    mu[i] = std::clamp(logistic(std::clamp(eta[i], -700.0, 700.0)), 1e-300, 1.0 - 1e-16);
  }
  return mu;
}

// Bernoulli variance, floored so working weights stay invertible under
// separation.
Eigen::VectorXd variance_of(const Eigen::VectorXd& mu) {
  return mu.unaryExpr([](double v) { return std::max(v * (1.0 - v), 1e-12); });
}

}  // namespace

bool GlmFit::has_term(std::string_view name) const {
  return std::any_of(terms.begin(), terms.end(), [&](const Estimate& e) { return e.name == name; });
}

const Estimate& GlmFit::term(std::string_view name) const {
  for (const auto& e : terms) {
    if (e.name == name) return e;
  }
  throw FormulaMismatch("fit has no term '" + std::string(name) + "'");
}

double GlmFit::predict(std::span<const double> row) const {
  if (row.size() != terms.size()) throw FormulaMismatch("predict row has the wrong length");
  double eta = 0.0;
  for (std::size_t j = 0; j < terms.size(); ++j) eta += terms[j].estimate * row[j];
  return logistic(eta);
}

GlmFit fit_logistic(const BinomialData& data, const LogisticOptions& options) {
  const Eigen::MatrixXd& x = data.design.x;
  const Eigen::VectorXd& k = data.successes;
  const Eigen::VectorXd& m = data.trials;
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (p < 1) throw RankError("logistic model needs at least one covariate");
  if (k.size() != n || m.size() != n) throw FormulaMismatch("response length differs from design");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(m[i] > 0.0) || k[i] < 0.0 || k[i] > m[i]) {
      throw RangeError("binomial row " + std::to_string(i) + " needs 0 <= k <= n and n > 0");
    }
  }
  require_full_rank(data.design);

  GlmFit fit;
  Eigen::VectorXd y = k.cwiseQuotient(m);
  Eigen::VectorXd mu(n);
  for (Eigen::Index i = 0; i < n; ++i) mu[i] = (k[i] + 0.5) / (m[i] + 1.0);
  Eigen::VectorXd eta = mu.unaryExpr([](double v) { return std::log(v / (1.0 - v)); });
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ridge = 0.0;
  double objective = std::numeric_limits<double>::infinity();
  const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(p, p);

  auto penalized = [&](const Eigen::VectorXd& b, Eigen::VectorXd& eta_out, Eigen::VectorXd& mu_out) {
    eta_out = x * b;
    mu_out = mean_of(eta_out);
    return deviance(k, m, mu_out) + ridge * b.squaredNorm();
  };

  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    const Eigen::VectorXd var = variance_of(mu);
    const Eigen::VectorXd w = m.cwiseProduct(var);
    Eigen::VectorXd z = eta + (y - mu).cwiseQuotient(var);
    const Eigen::MatrixXd xtw = x.transpose() * w.asDiagonal();
    const Eigen::MatrixXd info = xtw * x + ridge * identity;
    Eigen::VectorXd proposal = info.ldlt().solve(xtw * z);

    Eigen::VectorXd new_eta, new_mu;
    double new_objective = penalized(proposal, new_eta, new_mu);
    int halvings = 0;
    while (!(new_objective <= objective) && halvings < 40 && std::isfinite(objective)) {
      proposal = 0.5 * (proposal + beta);
      new_objective = penalized(proposal, new_eta, new_mu);
      ++halvings;
    }
    if (!(new_objective <= objective) && std::isfinite(objective)) {
      // No descent direction left at working precision.
      fit.iterations = iter;
      fit.converged = true;
      break;
    }
    const double change = objective - new_objective;
    beta = proposal;
    eta = new_eta;
    mu = new_mu;
    objective = new_objective;
    fit.deviance_trace.push_back(objective);
    fit.iterations = iter;

    if (ridge == 0.0 && eta.cwiseAbs().maxCoeff() > options.separation_eta) {
      ridge = options.ridge;
      fit.separation = true;
      objective += ridge * beta.squaredNorm();
      fit.deviance_trace.back() = objective;
      continue;
    }
    const Eigen::VectorXd gradient = x.transpose() * (k - m.cwiseProduct(mu)) - ridge * beta;
    if (gradient.cwiseAbs().maxCoeff() < options.gradient_tolerance ||
        (std::isfinite(change) && std::abs(change) < options.deviance_tolerance)) {
      fit.converged = true;
      break;
    }
  }

  const Eigen::VectorXd var = variance_of(mu);
  const Eigen::VectorXd w = m.cwiseProduct(var);
  const Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x + ridge * identity;
  fit.covariance = info.ldlt().solve(identity);
  fit.deviance = deviance(k, m, mu);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    ll += std::lgamma(m[i] + 1.0) - std::lgamma(k[i] + 1.0) - std::lgamma(m[i] - k[i] + 1.0);
    if (k[i] > 0.0) ll += k[i] * std::log(mu[i]);
    if (m[i] - k[i] > 0.0) ll += (m[i] - k[i]) * std::log1p(-mu[i]);
  }
  fit.log_likelihood = ll;
  for (Eigen::Index j = 0; j < p; ++j) {
    Estimate e;
    e.name = data.design.names[static_cast<std::size_t>(j)];
    e.estimate = beta[j];
    e.variance = fit.covariance(j, j);
    e.se = std::sqrt(e.variance);
    e.ci95 = {e.estimate - kZ975 * e.se, e.estimate + kZ975 * e.se};
    e.statistic = e.estimate / e.se;
    e.p_value = normal_two_sided_p(e.statistic);
    fit.terms.push_back(std::move(e));
  }
  return fit;
}

double crossing_point(const GlmFit& fit, const CrossingTerms& terms, double condition_value) {
  double numerator = fit.term(terms.intercept).estimate;
  double slope = fit.term(terms.score).estimate;
  if (terms.condition) numerator += fit.term(*terms.condition).estimate * condition_value;
  if (terms.interaction) slope += fit.term(*terms.interaction).estimate * condition_value;
  if (std::abs(slope) < 1e-12) throw DegenerateSlope("score slope is zero; no crossing point");
  return -numerator / slope;
}

}  // namespace align::stats
