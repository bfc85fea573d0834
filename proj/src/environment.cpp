#include "erw/environment.hpp"

#include <bit>
#include <cmath>
#include <map>
#include <mutex>
#include <sstream>

#include <fmt/format.h>

#include "erw/error.hpp"
#include "erw/summation.hpp"

namespace erw {

namespace {

constexpr CookieIndex kTransientHead = 3;
constexpr double kTransientHeadStrength = 5.0 / 6.0;
// Largest cookie index summed explicitly when no closed form is available.
constexpr CookieIndex kTermCap = CookieIndex{1} << 26;

// m >= 1 when j == 4^(4^m), else 0. Compares log_4(j) against 4^m so the test stays exact
// for every representable j.
int transient_level(CookieIndex j) {
  const auto u = static_cast<std::uint64_t>(j);
  if (j < 1 || !std::has_single_bit(u)) return 0;
  const int exponent = std::countr_zero(u);
  if (exponent % 2 != 0) return 0;
  const auto log4 = static_cast<std::uint64_t>(exponent / 2);
  if (log4 < 4 || !std::has_single_bit(log4) || std::countr_zero(log4) % 2 != 0) return 0;
  return std::countr_zero(log4) / 2;
}

// Index 4^(4^m) of the m-th negative cookie, or kUnboundedRun when it does not fit.
CookieIndex transient_negative_index(int m) {
  const int exponent = 2 * (1 << (2 * m));
  if (exponent >= 63) return kUnboundedRun;
  return CookieIndex{1} << exponent;
}

// sum_{i=1}^{count} (1/2)^i
double half_powers(std::int64_t count) { return 1.0 - std::ldexp(1.0, -static_cast<int>(count)); }

std::int64_t transient_negatives_upto(std::int64_t x) {
  std::int64_t count = 0;
  for (int m = 1;; ++m) {
    const CookieIndex idx = transient_negative_index(m);
    if (idx == kUnboundedRun || idx > x) break;
    ++count;
  }
  return count;
}

void check_strength(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError(fmt::format("{}: strength {} is outside (0,1)", what, p));
  }
}

void check_index(CookieIndex j) {
  if (j < 1) throw DomainError(fmt::format("cookie index must be >= 1, got {}", j));
}

std::string join_values(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ' ';
    out += fmt::format("{}", values[i]);
  }
  return out;
}

class RuleRegistry {
 public:
  static RuleRegistry& instance() {
    static RuleRegistry registry;
    return registry;
  }

  void add(StrengthRule rule) {
    std::lock_guard lock(mutex_);
    auto name = rule.name;
    rules_[name] = std::make_shared<const StrengthRule>(std::move(rule));
  }

  std::shared_ptr<const StrengthRule> find(const std::string& name) {
    std::lock_guard lock(mutex_);
    auto it = rules_.find(name);
    return it == rules_.end() ? nullptr : it->second;
  }

 private:
  RuleRegistry() {
    rules_["inverse-square"] = std::make_shared<const StrengthRule>(StrengthRule{
        "inverse-square",
        [](CookieIndex j) {
          const double d = static_cast<double>(j) + 1.0;
          return 0.5 + 0.25 / (d * d);
        },
        [](CookieIndex n) { return 0.5 / static_cast<double>(n); }});
    rules_["alternating-harmonic"] = std::make_shared<const StrengthRule>(StrengthRule{
        "alternating-harmonic",
        [](CookieIndex j) {
          const double sign = (j % 2 == 1) ? 1.0 : -1.0;
          return 0.5 + sign * 0.25 / static_cast<double>(j);
        },
        [](CookieIndex n) { return 0.5 / static_cast<double>(n); }});
  }

  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<const StrengthRule>> rules_;
};

}  // namespace

void register_rule(StrengthRule rule) {
  if (rule.name.empty() || !rule.strength) throw DomainError("rule needs a name and a strength function");
  RuleRegistry::instance().add(std::move(rule));
}

std::shared_ptr<const StrengthRule> find_rule(const std::string& name) {
  return RuleRegistry::instance().find(name);
}

// ---------------------------------------------------------------------------------------------

CookieEnvironment CookieEnvironment::finite(std::vector<double> strengths) {
  for (double p : strengths) check_strength(p, "finite environment");
  return CookieEnvironment(FiniteParams{std::move(strengths)}, nullptr);
}

CookieEnvironment CookieEnvironment::transient_example() {
  return CookieEnvironment(TransientExampleParams{}, nullptr);
}

CookieEnvironment CookieEnvironment::geometric_tail(std::vector<double> head, double ratio, double scale) {
  for (double p : head) check_strength(p, "geometric-tail head");
  if (!(ratio >= 0.0 && ratio < 1.0)) throw DomainError(fmt::format("geometric-tail ratio {} not in [0,1)", ratio));
  if (!(std::fabs(scale) * ratio < 1.0)) {
    throw DomainError(fmt::format("geometric-tail |scale * ratio| = {} must be < 1", std::fabs(scale) * ratio));
  }
  return CookieEnvironment(GeometricTailParams{std::move(head), ratio, scale}, nullptr);
}

CookieEnvironment CookieEnvironment::custom(const std::string& rule_name) {
  auto rule = find_rule(rule_name);
  if (!rule) throw DomainError(fmt::format("no strength rule registered under '{}'", rule_name));
  return CookieEnvironment(CustomParams{rule_name}, std::move(rule));
}

EnvKind CookieEnvironment::kind() const noexcept {
  return static_cast<EnvKind>(params_.index());
}

double CookieEnvironment::base_strength(CookieIndex j) const {
  switch (kind()) {
    case EnvKind::Finite: {
      const auto& s = std::get<FiniteParams>(params_).strengths;
      return j <= static_cast<CookieIndex>(s.size()) ? s[static_cast<std::size_t>(j - 1)] : 0.5;
    }
    case EnvKind::TransientExample: {
      if (j <= kTransientHead) return kTransientHeadStrength;
      const int m = transient_level(j);
      return m > 0 ? 0.5 - std::ldexp(1.0, -(m + 1)) : 0.5;
    }
    case EnvKind::GeometricTail: {
      const auto& g = std::get<GeometricTailParams>(params_);
      if (j <= static_cast<CookieIndex>(g.head.size())) return g.head[static_cast<std::size_t>(j - 1)];
      return 0.5 + 0.5 * base_weight(j);
    }
    case EnvKind::CustomRule: {
      const double p = rule_->strength(j);
      check_strength(p, "custom rule");
      return p;
    }
  }
  return 0.5;
}

double CookieEnvironment::base_weight(CookieIndex j) const {
  if (kind() == EnvKind::GeometricTail) {
    const auto& g = std::get<GeometricTailParams>(params_);
    const auto h = static_cast<CookieIndex>(g.head.size());
    if (j > h) return g.scale * std::pow(g.ratio, static_cast<double>(j - h));
  }
  return 2.0 * base_strength(j) - 1.0;
}

double CookieEnvironment::strength(CookieIndex j) const {
  check_index(j);
  const double p = base_strength(j);
  return reflected_ ? 1.0 - p : p;
}

double CookieEnvironment::drift_weight(CookieIndex j) const {
  check_index(j);
  const double w = base_weight(j);
  return reflected_ ? -w : w;
}

CookieIndex CookieEnvironment::placebo_run_after(CookieIndex k) const {
  if (k < 0) throw DomainError("placebo_run_after: k must be >= 0");
  switch (kind()) {
    case EnvKind::Finite: {
      const auto len = static_cast<CookieIndex>(std::get<FiniteParams>(params_).strengths.size());
      return k >= len ? kUnboundedRun : 0;
    }
    case EnvKind::TransientExample: {
      if (k < kTransientHead) return 0;
      for (int m = 1;; ++m) {
        const CookieIndex idx = transient_negative_index(m);
        if (idx == kUnboundedRun) return kUnboundedRun;
        if (idx > k) return idx - k - 1;
      }
    }
    case EnvKind::GeometricTail: {
      const auto& g = std::get<GeometricTailParams>(params_);
      return (g.scale == 0.0 || g.ratio == 0.0) && k >= static_cast<CookieIndex>(g.head.size()) ? kUnboundedRun : 0;
    }
    case EnvKind::CustomRule:
      return 0;
  }
  return 0;
}

std::string CookieEnvironment::describe() const {
  std::string body;
  switch (kind()) {
    case EnvKind::Finite: {
      const auto& s = std::get<FiniteParams>(params_).strengths;
      body = s.empty() ? "placebo" : fmt::format("finite({})", join_values(s));
      break;
    }
    case EnvKind::TransientExample:
      body = "transient-example";
      break;
    case EnvKind::GeometricTail: {
      const auto& g = std::get<GeometricTailParams>(params_);
      body = fmt::format("geometric-tail(ratio={} scale={} head={})", g.ratio, g.scale, join_values(g.head));
      break;
    }
    case EnvKind::CustomRule:
      body = fmt::format("custom({})", std::get<CustomParams>(params_).rule);
      break;
  }
  return reflected_ ? "reflect " + body : body;
}

bool operator==(const CookieEnvironment& a, const CookieEnvironment& b) {
  return a.reflected_ == b.reflected_ && a.params_ == b.params_;
}

CookieEnvironment reflect(const CookieEnvironment& env) {
  CookieEnvironment out = env;
  out.reflected_ = !env.reflected_;
  return out;
}

// ---------------------------------------------------------------------------------------------

double DriftAccumulator::next() {
  ++k_;
  const double x = env_->drift_weight(k_);
  const double t = sum_ + x;
  if (std::fabs(sum_) >= std::fabs(x)) {
    comp_ += (sum_ - t) + x;
  } else {
    comp_ += (x - t) + sum_;
  }
  sum_ = t;
  return sum_ + comp_;
}

double drift_prefix(const CookieEnvironment& env, CookieIndex m) {
  if (m < 0) throw DomainError("drift_prefix: m must be >= 0");
  const double sign = env.reflected() ? -1.0 : 1.0;
  switch (env.kind()) {
    case EnvKind::TransientExample: {
      // Each head cookie carries 2/3; 2k/3 is exact at k = 3.
      const double head = 2.0 * static_cast<double>(std::min(m, kTransientHead)) / 3.0;
      return sign * (head - half_powers(transient_negatives_upto(m)));
    }
    case EnvKind::Finite: {
      const auto& p = std::get<FiniteParams>(env.params()).strengths;
      CompensatedSum s;
      for (CookieIndex j = 1; j <= std::min<CookieIndex>(m, static_cast<CookieIndex>(p.size())); ++j) {
        s += 2.0 * p[static_cast<std::size_t>(j - 1)] - 1.0;
      }
      return sign * s.value();
    }
    case EnvKind::GeometricTail: {
      const auto& g = std::get<GeometricTailParams>(env.params());
      const auto h = static_cast<CookieIndex>(g.head.size());
      CompensatedSum s;
      for (CookieIndex j = 1; j <= std::min(m, h); ++j) s += 2.0 * g.head[static_cast<std::size_t>(j - 1)] - 1.0;
      if (m > h) {
        const double r = g.ratio;
        s += g.scale * r * (1.0 - std::pow(r, static_cast<double>(m - h))) / (1.0 - r);
      }
      return sign * s.value();
    }
    case EnvKind::CustomRule: {
      if (m > kTermCap) throw ResourceError(fmt::format("drift_prefix: custom rule summation capped at {} terms", kTermCap));
      DriftAccumulator acc(env);
      double d = 0.0;
      for (CookieIndex j = 1; j <= m; ++j) d = acc.next();
      return d;
    }
  }
  return 0.0;
}

double tail_bound(const CookieEnvironment& env, CookieIndex n) {
  if (n < 1) throw DomainError("tail_bound: n must be >= 1");
  switch (env.kind()) {
    case EnvKind::Finite: {
      const auto& p = std::get<FiniteParams>(env.params()).strengths;
      CompensatedSum s;
      for (CookieIndex j = n; j <= static_cast<CookieIndex>(p.size()); ++j) {
        s += std::fabs(2.0 * p[static_cast<std::size_t>(j - 1)] - 1.0);
      }
      return s.value();
    }
    case EnvKind::TransientExample: {
      double head = 0.0;
      for (CookieIndex j = n; j <= kTransientHead; ++j) head += 2.0 * kTransientHeadStrength - 1.0;
      // Remaining negative cookies start at level m0 = first m with 4^(4^m) >= n.
      const std::int64_t passed = transient_negatives_upto(n - 1);
      return head + std::ldexp(1.0, -static_cast<int>(passed));
    }
    case EnvKind::GeometricTail: {
      const auto& g = std::get<GeometricTailParams>(env.params());
      const auto h = static_cast<CookieIndex>(g.head.size());
      CompensatedSum s;
      for (CookieIndex j = n; j <= h; ++j) s += std::fabs(2.0 * g.head[static_cast<std::size_t>(j - 1)] - 1.0);
      const CookieIndex first = std::max<CookieIndex>(n - h, 1);
      s += std::fabs(g.scale) * std::pow(g.ratio, static_cast<double>(first)) / (1.0 - g.ratio);
      return s.value();
    }
    case EnvKind::CustomRule: {
      const auto& name = std::get<CustomParams>(env.params()).rule;
      auto rule = find_rule(name);
      if (!rule || !rule->tail_bound) {
        throw UnsupportedError(fmt::format("custom rule '{}' declares no tail-bound rule", name));
      }
      return rule->tail_bound(n);
    }
  }
  return 0.0;
}

DriftEstimate total_drift(const CookieEnvironment& env, double tol) {
  if (!(tol > 0.0)) throw DomainError("total_drift: tol must be > 0");
  const double sign = env.reflected() ? -1.0 : 1.0;
  switch (env.kind()) {
    case EnvKind::TransientExample:
      return {sign * 1.0, 0.0, 0};
    case EnvKind::Finite: {
      const auto len = static_cast<CookieIndex>(std::get<FiniteParams>(env.params()).strengths.size());
      return {drift_prefix(env, len), 0.0, len};
    }
    default:
      break;
  }
  CookieIndex n = 1;
  double bound = tail_bound(env, n + 1);
  while (bound > tol) {
    if (n >= kTermCap) {
      throw ConvergenceError(
          fmt::format("total_drift: tail bound {} still above tol {} after {} terms", bound, tol, n), bound);
    }
    n = std::min(2 * n, kTermCap);
    bound = tail_bound(env, n + 1);
  }
  return {drift_prefix(env, n), bound, n};
}

DriftProfile drift_profile(const CookieEnvironment& env, CookieIndex max_n, double tol) {
  if (max_n < 0) throw DomainError("drift_profile: max_n must be >= 0");
  DriftProfile out;
  out.prefix.resize(static_cast<std::size_t>(max_n) + 1, 0.0);
  DriftAccumulator acc(env);
  for (CookieIndex m = 1; m <= max_n; ++m) out.prefix[static_cast<std::size_t>(m)] = acc.next();
  out.tail.resize(static_cast<std::size_t>(max_n) + 2, 0.0);
  for (CookieIndex n = 1; n <= max_n + 1; ++n) out.tail[static_cast<std::size_t>(n)] = tail_bound(env, n);
  out.total = total_drift(env, tol);
  return out;
}

EnvStats env_stats(const CookieEnvironment& env, CookieIndex n) {
  if (n < 1) throw DomainError("env_stats: n must be >= 1");
  CompensatedSum mean, var, sq;
  for (CookieIndex j = 1; j <= n; ++j) {
    const double p = env.strength(j);
    const double w = env.drift_weight(j);
    mean += p;
    var += p * (1.0 - p);
    sq += w * w;
  }
  const double nd = static_cast<double>(n);
  EnvStats s;
  s.n = n;
  s.mean_strength = mean.value() / nd;
  s.variance_avg = var.value() / nd;
  const double gap_direct = std::fabs(s.variance_avg - 0.25);
  const double gap_squares = sq.value() / (4.0 * nd);
  // A_n carries absolute rounding of order eps * 1/4 that the sum of squares does not.
  const double tolerance = 1e-12 * gap_squares + 64.0 * std::numeric_limits<double>::epsilon() * 0.25;
  if (std::fabs(gap_direct - gap_squares) > tolerance) {
    throw ConsistencyError(fmt::format("env_stats: |A_n - 1/4| = {} but sum of squares gives {} at n = {}",
                                       gap_direct, gap_squares, n));
  }
  s.bessel_gap = gap_squares;
  return s;
}

std::int64_t neg_cookie_count(const CookieEnvironment& env, std::int64_t x) {
  if (x < 0) throw DomainError("neg_cookie_count: x must be >= 0");
  switch (env.kind()) {
    case EnvKind::TransientExample:
      return env.reflected() ? std::min<std::int64_t>(x, kTransientHead) : transient_negatives_upto(x);
    case EnvKind::Finite: {
      const auto len = static_cast<CookieIndex>(std::get<FiniteParams>(env.params()).strengths.size());
      std::int64_t count = 0;
      for (CookieIndex j = 1; j <= std::min(x, len); ++j) count += env.strength(j) < 0.5;
      return count;
    }
    case EnvKind::GeometricTail: {
      const auto& g = std::get<GeometricTailParams>(env.params());
      const auto h = static_cast<CookieIndex>(g.head.size());
      std::int64_t count = 0;
      for (CookieIndex j = 1; j <= std::min(x, h); ++j) count += env.strength(j) < 0.5;
      const double tail_sign = (env.reflected() ? -1.0 : 1.0) * g.scale;
      if (x > h && tail_sign < 0.0 && g.ratio > 0.0) count += x - h;
      return count;
    }
    case EnvKind::CustomRule: {
      if (x > kTermCap) throw ResourceError(fmt::format("neg_cookie_count: custom rule scan capped at {}", kTermCap));
      std::int64_t count = 0;
      for (CookieIndex j = 1; j <= x; ++j) count += env.strength(j) < 0.5;
      return count;
    }
  }
  return 0;
}

}  // namespace erw
