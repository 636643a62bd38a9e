#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "align/error.hpp"
#include "align/rng.hpp"
#include "align/stats.hpp"

namespace align::stats {

void ImputationConfig::validate() const {
  if (m < 2) throw ConfigError("multiple imputation needs m >= 2");
  if (k_donors < 1) throw ConfigError("k_donors must be >= 1");
}

namespace {

struct ColumnModel {
  std::size_t column;
  std::vector<std::size_t> observed;
  std::vector<std::size_t> missing;
  std::vector<double> predicted;  // all rows
  // Observed rows ordered by prediction, for nearest-donor search.
  std::vector<std::size_t> observed_by_prediction;
};

}  // namespace

std::vector<DataTable> impute_pmm(const DataTable& table, const ImputationConfig& config) {
  config.validate();
  const std::size_t n = table.rows();
  const auto k = static_cast<std::size_t>(config.k_donors);

  std::vector<std::size_t> complete;
  std::vector<ColumnModel> models;
  for (std::size_t c = 0; c < table.columns.size(); ++c) {
    ColumnModel model{c, {}, {}, {}, {}};
    for (std::size_t r = 0; r < n; ++r) {
      (std::isnan(table.columns[c][r]) ? model.missing : model.observed).push_back(r);
    }
    if (model.missing.empty()) {
      complete.push_back(c);
    } else {
      if (model.observed.size() < k) {
        throw TooFewDonors("column '" + table.names[c] + "' has " +
                           std::to_string(model.observed.size()) + " observed values, needs " +
                           std::to_string(k) + " donors");
      }
      models.push_back(std::move(model));
    }
  }
  if (models.empty()) return std::vector<DataTable>(static_cast<std::size_t>(config.m), table);
  if (complete.empty()) throw TooFewDonors("imputation needs at least one complete predictor column");

  Eigen::MatrixXd predictors(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(complete.size() + 1));
  predictors.col(0).setOnes();
  for (std::size_t j = 0; j < complete.size(); ++j) {
    for (std::size_t r = 0; r < n; ++r) {
      predictors(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j + 1)) = table.columns[complete[j]][r];
    }
  }
  for (auto& model : models) {
    const auto n_obs = static_cast<Eigen::Index>(model.observed.size());
    Eigen::MatrixXd x(n_obs, predictors.cols());
    Eigen::VectorXd y(n_obs);
    for (Eigen::Index i = 0; i < n_obs; ++i) {
      const auto r = static_cast<Eigen::Index>(model.observed[static_cast<std::size_t>(i)]);
      x.row(i) = predictors.row(r);
      y[i] = table.columns[model.column][static_cast<std::size_t>(r)];
    }
    const Eigen::VectorXd beta = x.colPivHouseholderQr().solve(y);
    const Eigen::VectorXd fitted = predictors * beta;
    model.predicted.assign(fitted.data(), fitted.data() + fitted.size());
    model.observed_by_prediction = model.observed;
    std::stable_sort(model.observed_by_prediction.begin(), model.observed_by_prediction.end(),
                     [&](std::size_t a, std::size_t b) { return model.predicted[a] < model.predicted[b]; });
  }

  std::vector<DataTable> out;
  out.reserve(static_cast<std::size_t>(config.m));
  for (int i = 0; i < config.m; ++i) {
    DataTable completed = table;
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(i)));
    for (const auto& model : models) {
      const auto& obs = model.observed_by_prediction;
      for (std::size_t r : model.missing) {
        const double target = model.predicted[r];
        // Expand a window around the insertion point to the k nearest
        // predictions; ties prefer the lower row index.
        auto pos = static_cast<std::size_t>(
            std::lower_bound(obs.begin(), obs.end(), target,
                             [&](std::size_t a, double t) { return model.predicted[a] < t; }) -
            obs.begin());
        std::size_t lo = pos;  // next candidate below is lo - 1
        std::size_t hi = pos;  // next candidate above is hi
        std::vector<std::size_t> donors;
        donors.reserve(k);
        while (donors.size() < k) {
          const bool has_lo = lo > 0;
          const bool has_hi = hi < obs.size();
          bool take_lo;
          if (has_lo && has_hi) {
            const double dl = std::abs(target - model.predicted[obs[lo - 1]]);
            const double dh = std::abs(model.predicted[obs[hi]] - target);
            take_lo = dl < dh || (dl == dh && obs[lo - 1] < obs[hi]);
          } else {
            take_lo = has_lo;
          }
          donors.push_back(take_lo ? obs[--lo] : obs[hi++]);
        }
        const std::size_t donor = donors[static_cast<std::size_t>(rng.below(donors.size()))];
        completed.columns[model.column][r] = table.columns[model.column][donor];
      }
    }
    out.push_back(std::move(completed));
  }
  return out;
}

}  // namespace align::stats
