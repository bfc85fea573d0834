#include "erw/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "erw/error.hpp"
#include "erw/parallel.hpp"

namespace erw {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::TransientRight: return "transient-right";
    case Verdict::TransientLeft: return "transient-left";
    case Verdict::Recurrent: return "recurrent";
    case Verdict::CriticalRecurrent: return "critical-recurrent";
    case Verdict::Undetermined: return "undetermined";
  }
  return "undetermined";
}

std::string to_string(TailCondition t) {
  switch (t) {
    case TailCondition::Holds: return "holds";
    case TailCondition::Fails: return "fails";
    case TailCondition::Unknown: return "unknown";
  }
  return "unknown";
}

TailCondition tail_condition(const CookieEnvironment& env) {
  double previous = std::numeric_limits<double>::infinity();
  double product = 0.0;
  for (int e = 1; e <= 9; ++e) {
    const auto n = static_cast<CookieIndex>(std::llround(std::pow(10.0, e)));
    product = tail_bound(env, n) * std::log(static_cast<double>(n));
    if (product > previous) return TailCondition::Unknown;
    previous = product;
  }
  return product < 1e-3 ? TailCondition::Holds : TailCondition::Unknown;
}

ClassificationResult classify(const CookieEnvironment& env, double tol) {
  ClassificationResult r;
  try {
    r.delta = total_drift(env, tol);
  } catch (const ConvergenceError& e) {
    // Settle for the tightest bound reachable; the verdict accounts for the wider error.
    r.delta = total_drift(env, e.best());
  }
  const double d = r.delta.value;
  // Summation rounding on top of the truncation bound.
  const double err = r.delta.error + 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(d));
  if (d - err > 1.0) {
    r.verdict = Verdict::TransientRight;
  } else if (d + err < -1.0) {
    r.verdict = Verdict::TransientLeft;
  } else if (std::fabs(d) + err < 1.0) {
    r.verdict = Verdict::Recurrent;
  } else {
    r.tail_condition = tail_condition(env);
    const bool at_critical = std::fabs(std::fabs(d) - 1.0) <= err;
    r.verdict = (at_critical && r.tail_condition == TailCondition::Holds) ? Verdict::CriticalRecurrent
                                                                          : Verdict::Undetermined;
  }
  return r;
}

namespace {

template <class Margin>
CertificateReport certify(const CookieEnvironment& env, const std::vector<std::int64_t>& n_grid, double eps,
                          unsigned threads, std::string kind, Margin&& margin) {
  if (n_grid.empty() || !std::is_sorted(n_grid.begin(), n_grid.end())) {
    throw DomainError("certificate grid must be non-empty and increasing");
  }
  if (n_grid.front() < 3) throw DomainError("certificate grid needs n >= 3");
  CertificateReport rep;
  rep.kind = std::move(kind);
  rep.points.resize(n_grid.size());
  parallel_for(n_grid.size(), threads, [&](std::size_t i) {
    const auto params = params_exact(env, n_grid[i], eps);
    rep.points[i] = margin(n_grid[i], params.theta);
  });
  rep.all_positive = std::all_of(rep.points.begin(), rep.points.end(), [](const auto& p) { return p.margin > 0.0; });
  return rep;
}

}  // namespace

CertificateReport certify_survival(const CookieEnvironment& env, const std::vector<std::int64_t>& n_grid, double eps,
                                   unsigned threads) {
  return certify(env, n_grid, eps, threads, "survival", [](std::int64_t n, double theta) {
    const double threshold = 1.0 + 2.0 / std::log(static_cast<double>(n));
    return CertificatePoint{n, theta, threshold, theta - threshold};
  });
}

CertificateReport certify_extinction(const CookieEnvironment& env, const std::vector<std::int64_t>& n_grid,
                                     double eps, unsigned threads) {
  return certify(env, n_grid, eps, threads, "extinction", [](std::int64_t n, double theta) {
    const double threshold = 1.0 + 1.0 / std::log(static_cast<double>(n));
    return CertificatePoint{n, theta, threshold, threshold - theta};
  });
}

}  // namespace erw
