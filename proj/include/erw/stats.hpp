#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace erw {

/// 95% normal-approximation half-width of a binomial proportion.
double binomial_half_width(std::int64_t successes, std::int64_t trials);

struct ChiSquareResult {
  double statistic = 0.0;
  int degrees_of_freedom = 0;
  double p_value = 1.0;
  int bins = 0;
};

/// Goodness of fit of observed counts against model probabilities over the same support.
/// Adjacent bins are merged left to right until every merged bin expects >= min_expected
/// samples; probability missing from `probs` (truncated tail) is assigned to the last bin, as
/// are observations beyond the support.
ChiSquareResult chi_square_gof(std::span<const double> probs, std::span<const std::int64_t> counts,
                               std::int64_t overflow_count, double min_expected = 5.0);

/// Upper-tail probability of a chi-square variable.
double chi_square_survival(double statistic, int degrees_of_freedom);

}  // namespace erw
