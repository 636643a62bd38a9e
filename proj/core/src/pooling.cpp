#include <cmath>
#include <limits>

#include "align/error.hpp"
#include "align/stats.hpp"

namespace align::stats {

const PooledEstimate& PooledFit::term(std::string_view name) const {
  for (const auto& t : terms) {
    if (t.name == name) return t;
  }
  throw FormulaMismatch("pooled fit has no term '" + std::string(name) + "'");
}

PooledFit pool_rubin(std::span<const std::vector<Estimate>> fits) {
  const std::size_t m = fits.size();
  if (m < 2) throw TooFewObservations("Rubin pooling needs at least 2 fits");
  const auto& first = fits.front();
  for (const auto& f : fits) {
    if (f.size() != first.size()) throw FormulaMismatch("fits have different numbers of terms");
    for (std::size_t j = 0; j < f.size(); ++j) {
      if (f[j].name != first[j].name) {
        throw FormulaMismatch("fits disagree on term " + std::to_string(j) + ": '" + first[j].name +
                              "' vs '" + f[j].name + "'");
      }
    }
  }
  const double md = static_cast<double>(m);
  PooledFit out;
  out.m = static_cast<int>(m);
  for (std::size_t j = 0; j < first.size(); ++j) {
    // Means are accumulated as offsets from the first fit so identical fits
    // pool to exactly that fit.
    const double q0 = first[j].estimate;
    const double u0 = first[j].variance;
    double dq = 0.0, du = 0.0;
    for (const auto& f : fits) {
      dq += f[j].estimate - q0;
      du += f[j].variance - u0;
    }
    PooledEstimate e;
    e.name = first[j].name;
    e.estimate = q0 + dq / md;
    e.within = u0 + du / md;
    double ss = 0.0;
    for (const auto& f : fits) ss += (f[j].estimate - e.estimate) * (f[j].estimate - e.estimate);
    e.between = ss / (md - 1.0);
    e.total = e.within + (1.0 + 1.0 / md) * e.between;
    e.se = std::sqrt(e.total);
    const double complete_df = first[j].df;
    if (e.between == 0.0) {
      e.df = complete_df;
    } else {
      const double r = (1.0 + 1.0 / md) * e.between / e.within;
      double df = e.within == 0.0 ? md - 1.0 : (md - 1.0) * (1.0 + 1.0 / r) * (1.0 + 1.0 / r);
      if (std::isfinite(complete_df)) {
        const double gamma = (1.0 + 1.0 / md) * e.between / e.total;
        const double observed = (complete_df + 1.0) / (complete_df + 3.0) * complete_df * (1.0 - gamma);
        df = 1.0 / (1.0 / df + 1.0 / observed);
      }
      e.df = df;
    }
    const double crit = std::isfinite(e.df) ? student_t_quantile(0.975, e.df) : kZ975;
    e.ci95 = {e.estimate - crit * e.se, e.estimate + crit * e.se};
    e.p_value = e.se > 0 ? student_t_two_sided_p(e.estimate / e.se, e.df) : 1.0;
    out.terms.push_back(std::move(e));
  }
  return out;
}

PooledFit pool_rubin(std::span<const OlsFit> fits) {
  std::vector<std::vector<Estimate>> estimates;
  for (const auto& f : fits) estimates.push_back(f.terms);
  return pool_rubin(std::span<const std::vector<Estimate>>(estimates));
}

PooledFit pool_rubin(std::span<const GlmFit> fits) {
  std::vector<std::vector<Estimate>> estimates;
  for (const auto& f : fits) estimates.push_back(f.terms);
  return pool_rubin(std::span<const std::vector<Estimate>>(estimates));
}

}  // namespace align::stats
