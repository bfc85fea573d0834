#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "erw/environment.hpp"
#include "erw/error.hpp"
#include "erw/philox.hpp"

namespace erw {

using Site = std::int64_t;

inline constexpr std::int64_t kDefaultSiteCap = 10'000'000;
/// Sites and visit indices are packed into 32-bit counter words.
inline constexpr std::int64_t kMaxHorizon = (std::int64_t{1} << 31) - 1;

/// The lazily realized coin stacks xi_j^x: the j-th coin at site x is a pure function of
/// (seed, stream, x, j), so a trajectory does not depend on the order coins are looked at.
class CoinField {
 public:
  CoinField(std::uint64_t seed, std::uint64_t stream) noexcept
      : key_(key_from_seed(seed)), stream_(stream) {}

  double uniform(Site site, std::int64_t visit) const noexcept {
    const Philox4x32::Counter ctr{static_cast<std::uint32_t>(site), static_cast<std::uint32_t>(visit),
                                  static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)};
    const auto out = Philox4x32::generate(ctr, key_);
    return to_unit((std::uint64_t{out[0]} << 32) | out[1]);
  }

  /// Heads (step right) with probability p.
  bool operator()(Site site, std::int64_t visit, double p) const noexcept { return uniform(site, visit) < p; }

 private:
  Philox4x32::Key key_;
  std::uint64_t stream_;
};

/// Mirror image of a CoinField: the coin at (x, j) is the complement of the original coin at
/// (-x, j). A walk in reflect(env) driven by these coins is the negation of the walk in env
/// driven by the original field.
class MirroredCoinField {
 public:
  MirroredCoinField(std::uint64_t seed, std::uint64_t stream) noexcept : base_(seed, stream) {}
  bool operator()(Site site, std::int64_t visit, double p) const noexcept {
    return 1.0 - base_.uniform(-site, visit) < p;
  }

 private:
  CoinField base_;
};

enum class CoinOrientation { Direct, Mirrored };

/// Visit counts on the contiguous range of sites a nearest-neighbour walk has seen.
class VisitCounter {
 public:
  explicit VisitCounter(std::int64_t site_cap = kDefaultSiteCap) : cap_(site_cap) {}

  std::uint32_t count(Site site) const noexcept {
    const Site i = site - offset_;
    return (i >= 0 && i < static_cast<Site>(data_.size())) ? data_[static_cast<std::size_t>(i)] : 0u;
  }

  /// Returns the updated count. Throws ResourceError when the distinct-site cap is exceeded.
  std::uint32_t increment(Site site);

  Site min_site() const noexcept { return min_; }
  Site max_site() const noexcept { return max_; }
  std::int64_t distinct() const noexcept { return empty_ ? 0 : max_ - min_ + 1; }
  std::int64_t cap() const noexcept { return cap_; }

 private:
  void grow_to_cover(Site site);

  std::vector<std::uint32_t> data_;
  Site offset_ = 0;
  Site min_ = 0;
  Site max_ = 0;
  bool empty_ = true;
  std::int64_t cap_;
};

struct WalkState {
  explicit WalkState(std::int64_t site_cap = kDefaultSiteCap) : visits(site_cap) { visits.increment(0); }

  Site position = 0;
  std::int64_t time = 0;
  /// Arrivals per site, including the arrival at time 0 for the origin.
  VisitCounter visits;
};

/// One step: consumes coin j = visits(X_t) at the current site and moves +-1.
template <class Coins>
void step(WalkState& state, const CookieEnvironment& env, const Coins& coins) {
  const std::int64_t j = state.visits.count(state.position);
  const bool right = coins(state.position, j, env.strength(j));
  state.position += right ? 1 : -1;
  ++state.time;
  state.visits.increment(state.position);
}

struct WalkOptions {
  std::int64_t site_cap = kDefaultSiteCap;
  /// Stop at the first return to 0 (summary.horizon then records the steps simulated).
  bool stop_at_first_return = false;
  bool record_trace = false;
};

struct WalkSummary {
  std::int64_t horizon = 0;
  std::int64_t returns_to_origin = 0;
  std::optional<std::int64_t> first_return_time;
  Site max_position = 0;
  Site min_position = 0;
  Site final_position = 0;
  int first_step = 0;
  /// trace[t] = X_t for t = 0..horizon when requested.
  std::vector<Site> trace;
};

template <class Coins>
WalkSummary run_walk(const CookieEnvironment& env, const Coins& coins, std::int64_t horizon,
                     const WalkOptions& options = {}) {
  if (horizon < 1 || horizon > kMaxHorizon) throw DomainError("walk horizon must be in [1, 2^31 - 1]");
  WalkState state(options.site_cap);
  WalkSummary s;
  if (options.record_trace) {
    s.trace.reserve(static_cast<std::size_t>(horizon) + 1);
    s.trace.push_back(0);
  }
  while (state.time < horizon) {
    step(state, env, coins);
    const Site x = state.position;
    if (state.time == 1) s.first_step = static_cast<int>(x);
    if (options.record_trace) s.trace.push_back(x);
    s.max_position = std::max(s.max_position, x);
    s.min_position = std::min(s.min_position, x);
    if (x == 0) {
      ++s.returns_to_origin;
      if (!s.first_return_time) s.first_return_time = state.time;
      if (options.stop_at_first_return) break;
    }
  }
  s.horizon = state.time;
  s.final_position = state.position;
  return s;
}

/// Walk from X_0 = 0 driven by CoinField(seed, stream).
WalkSummary run(const CookieEnvironment& env, std::uint64_t seed, std::uint64_t stream, std::int64_t horizon,
                const WalkOptions& options = {});

/// Replications r = 0..reps-1 use stream r; the result vector is indexed by r.
std::vector<WalkSummary> run_replications(const CookieEnvironment& env, std::uint64_t seed, std::int64_t horizon,
                                          std::int64_t reps, unsigned threads, const WalkOptions& options = {},
                                          CoinOrientation orientation = CoinOrientation::Direct);

struct ReturnCurvePoint {
  std::int64_t horizon = 0;
  std::int64_t returned = 0;
  std::int64_t reps = 0;
  double fraction = 0.0;
  double half_width = 0.0;
};

/// Empirical P(return to 0 by T) for each T in `horizons` (sorted ascending).
std::vector<ReturnCurvePoint> return_probability_curve(const CookieEnvironment& env, std::uint64_t seed,
                                                       const std::vector<std::int64_t>& horizons, std::int64_t reps,
                                                       unsigned threads = 1,
                                                       CoinOrientation orientation = CoinOrientation::Direct);

struct DirectionStats {
  std::int64_t reps = 0;
  std::int64_t right = 0;  ///< final position > 0
  std::int64_t left = 0;   ///< final position < 0
  std::int64_t zero = 0;
  double right_fraction() const { return reps ? static_cast<double>(right) / static_cast<double>(reps) : 0.0; }
  double left_fraction() const { return reps ? static_cast<double>(left) / static_cast<double>(reps) : 0.0; }
  double zero_fraction() const { return reps ? static_cast<double>(zero) / static_cast<double>(reps) : 0.0; }
};

DirectionStats direction_stats(const CookieEnvironment& env, std::uint64_t seed, std::int64_t horizon,
                               std::int64_t reps, unsigned threads = 1,
                               CoinOrientation orientation = CoinOrientation::Direct);

/// Fate of the first excursion: among walks whose first step is +1, the fraction that do not
/// return to 0 by the horizon (the walk-side counterpart of FBLP survival from Z_0 = 1), and
/// the overall fraction of walks that return to 0 by the horizon.
struct ExcursionStats {
  std::int64_t reps = 0;
  std::int64_t first_right = 0;
  std::int64_t escaped_right = 0;
  std::int64_t returned = 0;
  double escape_fraction() const {
    return first_right ? static_cast<double>(escaped_right) / static_cast<double>(first_right) : 0.0;
  }
  double return_fraction() const { return reps ? static_cast<double>(returned) / static_cast<double>(reps) : 0.0; }
};

ExcursionStats excursion_stats(const CookieEnvironment& env, std::uint64_t seed, std::int64_t horizon,
                               std::int64_t reps, unsigned threads = 1);

}  // namespace erw
