#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <variant>
#include <vector>

namespace erw {

/// Cookie index j >= 1 (visit number at a site).
using CookieIndex = std::int64_t;

inline constexpr CookieIndex kUnboundedRun = std::numeric_limits<CookieIndex>::max();

enum class EnvKind { Finite, TransientExample, GeometricTail, CustomRule };

/// A user-registered strength rule. `tail_bound`, when present, must return an upper bound on
/// |sum_{j>=n} (2 p_j - 1)| that is non-increasing in n and tends to 0.
struct StrengthRule {
  std::string name;
  std::function<double(CookieIndex)> strength;
  std::function<double(CookieIndex)> tail_bound;
};

/// Registers (or replaces) a rule by name. Thread-safe.
void register_rule(StrengthRule rule);
/// Returns nullptr when no rule of that name exists. Built-in rules: "inverse-square",
/// "alternating-harmonic".
std::shared_ptr<const StrengthRule> find_rule(const std::string& name);

struct FiniteParams {
  std::vector<double> strengths;
  bool operator==(const FiniteParams&) const = default;
};
struct TransientExampleParams {
  bool operator==(const TransientExampleParams&) const = default;
};
/// p_j = head[j-1] for j <= head.size(); beyond it 2 p_j - 1 = scale * ratio^(j - head.size()).
struct GeometricTailParams {
  std::vector<double> head;
  double ratio = 0.0;
  double scale = 0.0;
  bool operator==(const GeometricTailParams&) const = default;
};
struct CustomParams {
  std::string rule;
  bool operator==(const CustomParams&) const = default;
};

/// Identically piled, elliptic cookie stack with finite total drift. Immutable value type.
class CookieEnvironment {
 public:
  using Params = std::variant<FiniteParams, TransientExampleParams, GeometricTailParams, CustomParams>;

  static CookieEnvironment finite(std::vector<double> strengths);
  static CookieEnvironment placebo() { return finite({}); }
  /// p_1 = p_2 = p_3 = 5/6, p_k = 1/2 - (1/2)^(m+1) at k = 4^(4^m), placebo elsewhere.
  static CookieEnvironment transient_example();
  static CookieEnvironment geometric_tail(std::vector<double> head, double ratio, double scale);
  static CookieEnvironment custom(const std::string& rule_name);

  EnvKind kind() const noexcept;
  bool reflected() const noexcept { return reflected_; }
  const Params& params() const noexcept { return params_; }

  /// p_j; throws DomainError for j < 1.
  double strength(CookieIndex j) const;
  /// 2 p_j - 1, evaluated without the 1/2 round trip where the rule allows.
  double drift_weight(CookieIndex j) const;

  /// Number of indices after k whose strength is exactly 1/2 before the next non-placebo
  /// cookie; kUnboundedRun when every cookie after k is a placebo.
  CookieIndex placebo_run_after(CookieIndex k) const;

  /// Short human-readable label without commas (safe as a CSV field).
  std::string describe() const;

  friend CookieEnvironment reflect(const CookieEnvironment& env);
  friend bool operator==(const CookieEnvironment& a, const CookieEnvironment& b);

 private:
  CookieEnvironment(Params params, std::shared_ptr<const StrengthRule> rule)
      : params_(std::move(params)), rule_(std::move(rule)) {}

  double base_weight(CookieIndex j) const;
  double base_strength(CookieIndex j) const;

  Params params_;
  std::shared_ptr<const StrengthRule> rule_;
  bool reflected_ = false;
};

/// Environment with strengths 1 - p_j. reflect(reflect(e)) == e.
CookieEnvironment reflect(const CookieEnvironment& env);

/// delta_m = sum_{j<=m} (2 p_j - 1), compensated. delta_0 = 0.
double drift_prefix(const CookieEnvironment& env, CookieIndex m);

/// Incremental delta_k for k = 1, 2, ... .
class DriftAccumulator {
 public:
  explicit DriftAccumulator(const CookieEnvironment& env) : env_(&env) {}
  /// Advances to the next index and returns delta_k.
  double next();
  CookieIndex index() const noexcept { return k_; }

 private:
  const CookieEnvironment* env_;
  CookieIndex k_ = 0;
  double sum_ = 0.0;
  double comp_ = 0.0;
};

struct DriftEstimate {
  double value = 0.0;
  /// Upper bound on |delta - value|.
  double error = 0.0;
  /// Number of cookies summed (0 for closed forms).
  CookieIndex terms = 0;
};

/// Total drift delta = lim delta_m with an error bound <= tol.
/// Throws ConvergenceError when the tail bound never reaches tol within the term cap.
DriftEstimate total_drift(const CookieEnvironment& env, double tol);

/// Upper bound on |sum_{j>=n} (2 p_j - 1)|, non-increasing in n.
double tail_bound(const CookieEnvironment& env, CookieIndex n);

/// Prefix sums, total and tail bounds for indices up to max_n.
struct DriftProfile {
  std::vector<double> prefix;  ///< prefix[m] = delta_m, m = 0..max_n
  DriftEstimate total;
  std::vector<double> tail;    ///< tail[n] = tail_bound(n), n = 1..max_n+1 (tail[0] unused)
};
DriftProfile drift_profile(const CookieEnvironment& env, CookieIndex max_n, double tol);

struct EnvStats {
  CookieIndex n = 0;
  double mean_strength = 0.0;  ///< p-bar_n
  double variance_avg = 0.0;   ///< A_n
  double bessel_gap = 0.0;     ///< b_n = |A_n - 1/4|
};

/// Throws ConsistencyError if the two expressions for b_n disagree beyond rounding.
EnvStats env_stats(const CookieEnvironment& env, CookieIndex n);

/// C_p(x) = #{ j <= x : p_j < 1/2 }.
std::int64_t neg_cookie_count(const CookieEnvironment& env, std::int64_t x);

}  // namespace erw
