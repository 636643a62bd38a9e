#include "align/analysis.hpp"

#include <cmath>
#include <map>
#include <tuple>

#include "align/error.hpp"
#include "align/rng.hpp"

namespace align::analysis {

double condition_code(Condition condition) noexcept {
  return condition == Condition::Utterance ? 1.0 : 0.0;
}

stats::BinomialData validation_rows(std::span<const AccuracyRow> rows) {
  bool both = false;
  for (const auto& r : rows) both = both || r.condition != rows.front().condition;
  stats::DataTable t;
  std::vector<double> score, condition;
  for (const auto& r : rows) {
    score.push_back(r.clip_score);
    condition.push_back(condition_code(r.condition));
  }
  t.add_column("score", std::move(score));
  t.add_column("condition", std::move(condition));
  std::vector<std::string> terms{"score"};
  if (both) terms.insert(terms.end(), {"condition", "score:condition"});
  stats::BinomialData d;
  d.design = stats::build_design(t, terms);
  d.successes.resize(static_cast<Eigen::Index>(rows.size()));
  d.trials.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    d.successes[static_cast<Eigen::Index>(i)] = rows[i].k;
    d.trials[static_cast<Eigen::Index>(i)] = rows[i].n;
  }
  return d;
}

std::vector<stats::BinSummary> model_curve(std::span<const double> scores,
                                           std::span<const double> correct, int replicates,
                                           std::uint64_t seed) {
  return stats::binned_means(scores, correct, 10, stats::BinRule::Quantile, replicates, seed);
}

ValidationAnalysis validation_analysis(std::span<const AccuracyRow> rows, int replicates,
                                       std::uint64_t seed) {
  if (rows.empty()) throw TooFewObservations("validation analysis needs at least one trial row");
  ValidationAnalysis out;
  out.fit = stats::fit_logistic(validation_rows(rows));
  out.n_trials = rows.size();
  for (const auto& r : rows) out.n_responses += static_cast<std::size_t>(r.n);

  stats::CrossingTerms terms;
  if (out.fit.has_term("condition")) {
    terms.condition = "condition";
    terms.interaction = "score:condition";
  }
  std::map<Condition, std::vector<const AccuracyRow*>> by_condition;
  for (const auto& r : rows) by_condition[r.condition].push_back(&r);
  for (const auto& [condition, members] : by_condition) {
    ConditionCurve curve;
    curve.condition = condition;
    try {
      curve.crossing_point = stats::crossing_point(out.fit, terms, condition_code(condition));
    } catch (const DegenerateSlope&) {
    }
    // Deciles over responses: each trial contributes its accuracy weighted by n.
    std::vector<double> xs, ys;
    for (const auto* r : members) {
      for (int i = 0; i < r->n; ++i) {
        xs.push_back(r->clip_score);
        ys.push_back(i < r->k ? 1.0 : 0.0);
      }
    }
    if (xs.size() >= 10) {
      curve.deciles = stats::binned_means(xs, ys, 10, stats::BinRule::Quantile, replicates,
                                          derive_seed(seed, static_cast<std::uint64_t>(condition)));
    }
    out.curves.push_back(std::move(curve));
  }

  std::map<std::string, std::pair<std::optional<double>, std::optional<double>>> by_utterance;
  for (const auto& r : rows) {
    auto& slot = by_utterance[r.utterance_id];
    (r.condition == Condition::Image ? slot.first : slot.second) = r.accuracy;
  }
  std::vector<double> image, utterance;
  for (const auto& [id, pair] : by_utterance) {
    if (pair.first && pair.second) {
      image.push_back(*pair.first);
      utterance.push_back(*pair.second);
    }
  }
  if (image.size() >= 3) {
    try {
      out.cross_condition = stats::pearson(image, utterance);
    } catch (const ZeroVariance&) {
    }
  }
  return out;
}

namespace {

const Session& session_of(const Corpus& corpus, const Utterance& u) {
  return *corpus.find_session(u.session_id);
}

void check_clusters(const ClusteredRows& rows, std::string_view what) {
  if (rows.clusters.empty()) throw TooFewObservations(std::string(what) + ": no rows");
}

}  // namespace

ClusteredRows speaker_rows(const Corpus& corpus, std::span<const AlignmentRecord> records) {
  struct Acc {
    std::size_t n = 0, high = 0;
    double age = 0.0;
  };
  std::map<std::tuple<std::string, std::string, int>, Acc> cells;
  for (const auto& r : records) {
    const Utterance* u = corpus.find_utterance(r.utterance_id);
    if (!u || u->speaker == Speaker::Unknown) continue;
    const Session& s = session_of(corpus, *u);
    const int adult = u->speaker == Speaker::Adult ? 1 : 0;
    Acc& a = cells[{s.child_id, s.session_id, adult}];
    a.n += 1;
    a.high += r.is_high ? 1 : 0;
    a.age = s.age_months;
  }
  ClusteredRows out;
  std::vector<double> prop, adult, age;
  for (const auto& [key, a] : cells) {
    out.clusters.push_back(std::get<0>(key));
    prop.push_back(static_cast<double>(a.high) / static_cast<double>(a.n));
    adult.push_back(std::get<2>(key));
    age.push_back(a.age);
  }
  check_clusters(out, "speaker model");
  stats::DataTable t;
  t.add_column("speaker_adult", std::move(adult));
  t.add_column("age_months", std::move(age));
  const std::vector<std::string> terms{"speaker_adult", "age_months"};
  out.data.design = stats::build_design(t, terms);
  out.data.y = Eigen::Map<const Eigen::VectorXd>(prop.data(), static_cast<Eigen::Index>(prop.size()));
  return out;
}

ClusteredRows duration_rows(const Corpus& corpus, std::span<const AlignmentRecord> records) {
  ClusteredRows out;
  std::vector<double> y, duration, age;
  for (const auto& r : records) {
    const Utterance* u = corpus.find_utterance(r.utterance_id);
    if (!u) continue;
    const Session& s = session_of(corpus, *u);
    out.clusters.push_back(s.child_id);
    y.push_back(r.max_score);
    duration.push_back(u->duration_s());
    age.push_back(s.age_months);
  }
  check_clusters(out, "duration model");
  stats::DataTable t;
  t.add_column("duration_s", std::move(duration));
  t.add_column("age_months", std::move(age));
  const std::vector<std::string> terms{"duration_s", "age_months", "duration_s:age_months"};
  out.data.design = stats::build_design(t, terms);
  out.data.y = Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  return out;
}

stats::OlsFit fit_clustered(const ClusteredRows& rows, int replicates, std::uint64_t seed,
                            unsigned threads) {
  return stats::fit_ols_clustered(rows.data, rows.clusters, replicates, seed, threads);
}

// ---------------------------------------------------------------------------
// Reports

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json interval(const stats::Interval& i) { return json::array({number(i.lo), number(i.hi)}); }

}  // namespace

json to_json(const stats::Estimate& e) {
  return json{{"term", e.name},          {"estimate", number(e.estimate)}, {"se", number(e.se)},
              {"ci95", interval(e.ci95)}, {"statistic", number(e.statistic)},
              {"p_value", number(e.p_value)}, {"df", number(e.df)}};
}

json to_json(const stats::GlmFit& fit) {
  json terms = json::array();
  for (const auto& e : fit.terms) terms.push_back(to_json(e));
  return json{{"family", "binomial"},
              {"link", "logit"},
              {"coefficients", std::move(terms)},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"log_likelihood", number(fit.log_likelihood)},
              {"deviance", number(fit.deviance)},
              {"separation", fit.separation},
              {"ci_method", "Wald, estimate +/- 1.96 SE"}};
}

json to_json(const stats::OlsFit& fit) {
  json terms = json::array();
  for (std::size_t i = 0; i < fit.terms.size(); ++i) {
    json t = to_json(fit.terms[i]);
    if (i < fit.cluster_bootstrap_ci95.size()) {
      t["cluster_bootstrap_ci95"] = interval(fit.cluster_bootstrap_ci95[i]);
      t["bootstrap_se"] = number(fit.bootstrap_se[i]);
    }
    terms.push_back(std::move(t));
  }
  json j{{"family", "gaussian"},
         {"coefficients", std::move(terms)},
         {"n", fit.n},
         {"residual_variance", number(fit.residual_variance)}};
  if (fit.replicates > 0) {
    j["n_clusters"] = fit.n_clusters;
    j["bootstrap_replicates"] = fit.replicates;
    j["failed_replicates"] = fit.failed_replicates;
    j["bootstrap_seed"] = fit.seed;
  }
  return j;
}

json to_json(const stats::PooledFit& fit) {
  json terms = json::array();
  for (const auto& e : fit.terms) {
    terms.push_back(json{{"term", e.name},
                         {"estimate", number(e.estimate)},
                         {"within_variance", number(e.within)},
                         {"between_variance", number(e.between)},
                         {"total_variance", number(e.total)},
                         {"se", number(e.se)},
                         {"df", number(e.df)},
                         {"ci95", interval(e.ci95)},
                         {"p_value", number(e.p_value)}});
  }
  return json{{"imputations", fit.m}, {"coefficients", std::move(terms)}};
}

json to_json(std::span<const stats::BinSummary> bins) {
  json out = json::array();
  for (const auto& b : bins) {
    out.push_back(json{{"bin", b.bin},
                       {"x_lo", number(b.x_lo)},
                       {"x_hi", number(b.x_hi)},
                       {"n", b.n},
                       {"mean_x", number(b.mean_x)},
                       {"mean_y", number(b.mean_y)},
                       {"ci95", interval(b.ci95)}});
  }
  return out;
}

json to_json(const ValidationAnalysis& a) {
  json curves = json::array();
  for (const auto& c : a.curves) {
    curves.push_back(json{{"condition", to_string(c.condition)},
                          {"crossing_point", c.crossing_point ? json(*c.crossing_point) : json(nullptr)},
                          {"deciles", to_json(c.deciles)}});
  }
  json j{{"logistic", to_json(a.fit)},
         {"unit", "per-trial binomial (k correct of n responses)"},
         {"condition_coding", {{"image", 0}, {"utterance", 1}}},
         {"curves", std::move(curves)},
         {"n_trials", a.n_trials},
         {"n_responses", a.n_responses}};
  if (a.cross_condition) {
    j["cross_condition_pearson"] = {{"r", number(a.cross_condition->r)},
                                    {"p_value", number(a.cross_condition->p_value)},
                                    {"n", a.cross_condition->n}};
  } else {
    j["cross_condition_pearson"] = nullptr;
  }
  return j;
}

}  // namespace align::analysis
