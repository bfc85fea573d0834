#include "erw/walk.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "erw/parallel.hpp"
#include "erw/stats.hpp"

namespace erw {

void VisitCounter::grow_to_cover(Site site) {
  const Site old_lo = offset_;
  const Site old_hi = offset_ + static_cast<Site>(data_.size());
  const Site span = std::max<Site>(64, 2 * static_cast<Site>(data_.size()));
  Site lo = old_lo;
  Site hi = old_hi;
  if (data_.empty()) {
    lo = site - span / 2;
    hi = site + span / 2;
  } else if (site < old_lo) {
    lo = std::min(site, old_lo - span / 2);
  } else {
    hi = std::max(site + 1, old_hi + span / 2);
  }
  std::vector<std::uint32_t> grown(static_cast<std::size_t>(hi - lo), 0u);
  std::copy(data_.begin(), data_.end(), grown.begin() + (old_lo - lo));
  data_ = std::move(grown);
  offset_ = lo;
}

std::uint32_t VisitCounter::increment(Site site) {
  if (empty_) {
    min_ = max_ = site;
    empty_ = false;
  } else if (site < min_ || site > max_) {
    const Site lo = std::min(min_, site);
    const Site hi = std::max(max_, site);
    if (hi - lo + 1 > cap_) {
      throw ResourceError(fmt::format("walk visited more than the site cap of {} distinct sites", cap_));
    }
    min_ = lo;
    max_ = hi;
  }
  Site i = site - offset_;
  if (i < 0 || i >= static_cast<Site>(data_.size())) {
    grow_to_cover(site);
    i = site - offset_;
  }
  return ++data_[static_cast<std::size_t>(i)];
}

WalkSummary run(const CookieEnvironment& env, std::uint64_t seed, std::uint64_t stream, std::int64_t horizon,
                const WalkOptions& options) {
  return run_walk(env, CoinField(seed, stream), horizon, options);
}

std::vector<WalkSummary> run_replications(const CookieEnvironment& env, std::uint64_t seed, std::int64_t horizon,
                                          std::int64_t reps, unsigned threads, const WalkOptions& options,
                                          CoinOrientation orientation) {
  if (reps < 1) throw DomainError("reps must be >= 1");
  std::vector<WalkSummary> out(static_cast<std::size_t>(reps));
  WalkOptions opts = options;
  opts.record_trace = false;
  parallel_for(out.size(), threads, [&](std::size_t r) {
    if (orientation == CoinOrientation::Mirrored) {
      out[r] = run_walk(env, MirroredCoinField(seed, r), horizon, opts);
    } else {
      out[r] = run_walk(env, CoinField(seed, r), horizon, opts);
    }
  });
  return out;
}

std::vector<ReturnCurvePoint> return_probability_curve(const CookieEnvironment& env, std::uint64_t seed,
                                                       const std::vector<std::int64_t>& horizons, std::int64_t reps,
                                                       unsigned threads, CoinOrientation orientation) {
  if (horizons.empty() || !std::is_sorted(horizons.begin(), horizons.end())) {
    throw DomainError("return_probability_curve: horizons must be non-empty and sorted");
  }
  WalkOptions opts;
  opts.stop_at_first_return = true;
  const auto runs = run_replications(env, seed, horizons.back(), reps, threads, opts, orientation);
  std::vector<ReturnCurvePoint> curve;
  for (const auto T : horizons) {
    ReturnCurvePoint pt;
    pt.horizon = T;
    pt.reps = reps;
    for (const auto& s : runs) pt.returned += (s.first_return_time && *s.first_return_time <= T);
    pt.fraction = static_cast<double>(pt.returned) / static_cast<double>(reps);
    pt.half_width = binomial_half_width(pt.returned, reps);
    curve.push_back(pt);
  }
  return curve;
}

DirectionStats direction_stats(const CookieEnvironment& env, std::uint64_t seed, std::int64_t horizon,
                               std::int64_t reps, unsigned threads, CoinOrientation orientation) {
  const auto runs = run_replications(env, seed, horizon, reps, threads, {}, orientation);
  DirectionStats d;
  d.reps = reps;
  for (const auto& s : runs) {
    if (s.final_position > 0) {
      ++d.right;
    } else if (s.final_position < 0) {
      ++d.left;
    } else {
      ++d.zero;
    }
  }
  return d;
}

ExcursionStats excursion_stats(const CookieEnvironment& env, std::uint64_t seed, std::int64_t horizon,
                               std::int64_t reps, unsigned threads) {
  WalkOptions opts;
  opts.stop_at_first_return = true;
  const auto runs = run_replications(env, seed, horizon, reps, threads, opts);
  ExcursionStats e;
  e.reps = reps;
  for (const auto& s : runs) {
    const bool returned = s.first_return_time.has_value();
    e.returned += returned;
    if (s.first_step == 1) {
      ++e.first_right;
      e.escaped_right += !returned;
    }
  }
  return e;
}

}  // namespace erw
