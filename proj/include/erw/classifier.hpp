#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "erw/blp.hpp"
#include "erw/environment.hpp"

namespace erw {

enum class Verdict { TransientRight, TransientLeft, Recurrent, CriticalRecurrent, Undetermined };
enum class TailCondition { Holds, Fails, Unknown };

std::string to_string(Verdict v);
std::string to_string(TailCondition t);

struct CertificatePoint {
  std::int64_t n = 0;
  double theta = 0.0;
  double threshold = 0.0;
  /// Positive when the certificate inequality holds at n.
  double margin = 0.0;
};

struct ClassificationResult {
  Verdict verdict = Verdict::Undetermined;
  DriftEstimate delta;
  TailCondition tail_condition = TailCondition::Unknown;
  std::vector<CertificatePoint> evidence;
};

/// Recurrence/transience verdict from the total drift:
///   delta - err > 1 -> TransientRight, delta + err < -1 -> TransientLeft,
///   |delta| + err < 1 -> Recurrent, |delta| = 1 within err with tail_bound(n) log n -> 0
///   verified -> CriticalRecurrent, anything else -> Undetermined. err is the truncation bound
///   plus a few ulps of summation rounding. When tol cannot be reached the tightest reachable
///   bound is used instead.
ClassificationResult classify(const CookieEnvironment& env, double tol = 1e-9);

/// Checks tail_bound(n) * log(n) on the grid n = 10^1 .. 10^9: Holds when the product is
/// non-increasing along the grid and below 1e-3 by n = 10^9, Unknown otherwise.
TailCondition tail_condition(const CookieEnvironment& env);

/// Numerical evidence for survival (margin theta(n) - 1 - 2/log n) or for extinction
/// (margin 1 + 1/log n - theta(n)) over a grid of n >= 3. Not a proof.
struct CertificateReport {
  std::string kind;
  std::vector<CertificatePoint> points;
  bool all_positive = false;
};

CertificateReport certify_survival(const CookieEnvironment& env, const std::vector<std::int64_t>& n_grid,
                                   double eps = kDefaultTruncation, unsigned threads = 1);
CertificateReport certify_extinction(const CookieEnvironment& env, const std::vector<std::int64_t>& n_grid,
                                     double eps = kDefaultTruncation, unsigned threads = 1);

}  // namespace erw
