#include "erw/stats.hpp"

#include <cmath>

#include <boost/math/distributions/chi_squared.hpp>

#include "erw/error.hpp"

namespace erw {

double binomial_half_width(std::int64_t successes, std::int64_t trials) {
  if (trials <= 0) return 0.0;
  const double p = static_cast<double>(successes) / static_cast<double>(trials);
  return 1.959963984540054 * std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
}

double chi_square_survival(double statistic, int degrees_of_freedom) {
  if (degrees_of_freedom < 1) return 1.0;
  boost::math::chi_squared dist(degrees_of_freedom);
  return boost::math::cdf(boost::math::complement(dist, std::max(statistic, 0.0)));
}

ChiSquareResult chi_square_gof(std::span<const double> probs, std::span<const std::int64_t> counts,
                               std::int64_t overflow_count, double min_expected) {
  if (probs.size() != counts.size()) throw DomainError("chi_square_gof: probs and counts differ in length");
  std::int64_t total = overflow_count;
  double prob_sum = 0.0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    total += counts[i];
    prob_sum += probs[i];
  }
  if (total == 0) throw DomainError("chi_square_gof: no observations");
  const double n = static_cast<double>(total);

  std::vector<double> expected;
  std::vector<double> observed;
  double e_acc = 0.0;
  double o_acc = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    e_acc += probs[i] * n;
    o_acc += static_cast<double>(counts[i]);
    if (e_acc >= min_expected) {
      expected.push_back(e_acc);
      observed.push_back(o_acc);
      e_acc = o_acc = 0.0;
    }
  }
  e_acc += std::max(0.0, 1.0 - prob_sum) * n;
  o_acc += static_cast<double>(overflow_count);
  if (expected.empty()) {
    expected.push_back(e_acc);
    observed.push_back(o_acc);
  } else {
    expected.back() += e_acc;
    observed.back() += o_acc;
  }

  ChiSquareResult r;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double d = observed[i] - expected[i];
    r.statistic += d * d / expected[i];
  }
  r.bins = static_cast<int>(expected.size());
  r.degrees_of_freedom = r.bins - 1;
  r.p_value = chi_square_survival(r.statistic, r.degrees_of_freedom);
  return r;
}

}  // namespace erw
