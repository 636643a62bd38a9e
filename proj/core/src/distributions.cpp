#include <cmath>
#include <limits>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "align/stats.hpp"

namespace align::stats {

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

double student_t_two_sided_p(double t, double df) {
  if (!std::isfinite(df)) return normal_two_sided_p(t);
  if (!std::isfinite(t)) return 0.0;
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

double student_t_quantile(double p, double df) {
  if (!std::isfinite(df) || df > 1e7) {
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
  }
  return boost::math::quantile(boost::math::students_t(df), p);
}

}  // namespace align::stats
