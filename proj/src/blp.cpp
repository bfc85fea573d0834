#include "erw/blp.hpp"

#include <cmath>
#include <limits>
#include <random>

#include <fmt/format.h>

#include "erw/error.hpp"
#include "erw/parallel.hpp"
#include "erw/stats.hpp"
#include "erw/summation.hpp"

namespace erw {

namespace {

void check_generation_size(std::int64_t n) {
  if (n < 1) throw DomainError(fmt::format("generation size n must be >= 1, got {}", n));
}

double band_sum(const std::vector<double>& v, std::int64_t lo, std::int64_t hi) {
  CompensatedSum s;
  for (std::int64_t f = lo; f <= hi; ++f) s += v[static_cast<std::size_t>(f)];
  return s.value();
}

TransitionSample sample_coins(const CookieEnvironment& env, std::int64_t n, CounterRng& rng, std::int64_t cap) {
  TransitionSample out;
  std::int64_t failures = 0;
  while (failures < n) {
    if (++out.trials > cap) {
      throw ResourceError(fmt::format("sample_transition: trial cap {} exceeded for n = {}", cap, n));
    }
    if (rng.bernoulli(env.strength(out.trials))) {
      ++out.successes;
    } else {
      ++failures;
    }
  }
  return out;
}

TransitionSample sample_blocked(const CookieEnvironment& env, std::int64_t n, CounterRng& rng, std::int64_t cap) {
  TransitionSample out;
  std::int64_t remaining = n;
  while (remaining > 0) {
    const CookieIndex run = env.placebo_run_after(out.trials);
    if (run == 0) {
      if (++out.trials > cap) {
        throw ResourceError(fmt::format("sample_transition: trial cap {} exceeded for n = {}", cap, n));
      }
      if (rng.bernoulli(env.strength(out.trials))) {
        ++out.successes;
      } else {
        --remaining;
      }
      continue;
    }
    // Fair coins on (k, k + run]: either the remaining failures all land inside the run
    // (negative binomial, conditioned on fitting) or the run is consumed whole with fewer
    // failures than needed (binomial conditioned on F < remaining).
    std::negative_binomial_distribution<std::int64_t> successes_before(remaining, 0.5);
    const std::int64_t s = successes_before(rng);
    if (run == kUnboundedRun || s + remaining <= run) {
      out.successes += s;
      out.trials += s + remaining;
      remaining = 0;
    } else {
      std::binomial_distribution<std::int64_t> failures_in_run(run, 0.5);
      std::int64_t f = 0;
      do {
        f = failures_in_run(rng);
      } while (f >= remaining);
      out.successes += run - f;
      out.trials += run;
      remaining -= f;
    }
    if (out.trials > cap) {
      throw ResourceError(fmt::format("sample_transition: trial cap {} exceeded for n = {}", cap, n));
    }
  }
  return out;
}

}  // namespace

TransitionDistribution exact_transition(const CookieEnvironment& env, std::int64_t n, double eps,
                                        std::int64_t trial_cap) {
  check_generation_size(n);
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("exact_transition: eps must lie in (0,1)");
  const std::int64_t cap = trial_cap > 0 ? trial_cap : default_trial_cap(n);
  // At most one band entry is created per trial, so total pruned mass stays below eps / 100.
  const double prune_tol = 0.01 * eps / (2.0 * static_cast<double>(cap) + 2.0);

  TransitionDistribution d;
  d.n = n;
  std::vector<double> cur(static_cast<std::size_t>(n), 0.0);
  std::vector<double> next(static_cast<std::size_t>(n), 0.0);
  cur[0] = 1.0;
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  double remaining = 1.0;
  double pruned = 0.0;
  const std::int64_t last = n - 1;

  for (std::int64_t k = 1; k <= cap; ++k) {
    const double p = env.strength(k);
    const double q = 1.0 - p;
    const double absorbed = (hi == last) ? cur[static_cast<std::size_t>(last)] * q : 0.0;
    const std::int64_t new_hi = std::min(hi + 1, last);

    double* nx = next.data();
    const double* cu = cur.data();
    nx[lo] = cu[lo] * p;
    for (std::int64_t f = lo + 1; f <= hi; ++f) nx[f] = cu[f] * p + cu[f - 1] * q;
    if (new_hi > hi) nx[new_hi] = cu[hi] * q;
    std::swap(cur, next);
    hi = new_hi;
    if (k >= n) d.masses.push_back(absorbed);

    double pruned_now = 0.0;
    while (lo < hi && cur[static_cast<std::size_t>(lo)] < prune_tol) pruned_now += cur[static_cast<std::size_t>(lo++)];
    while (hi > lo && cur[static_cast<std::size_t>(hi)] < prune_tol) pruned_now += cur[static_cast<std::size_t>(hi--)];
    pruned += pruned_now;

    remaining -= absorbed + pruned_now;
    if (remaining + pruned <= 4.0 * eps || (k & 1023) == 0) remaining = band_sum(cur, lo, hi);
    if (remaining + pruned <= eps) {
      d.trials = k;
      d.unabsorbed_mass = remaining;
      d.pruned_mass = pruned;
      d.tail_mass = remaining + pruned;
      d.support_max = static_cast<std::int64_t>(d.masses.size()) - 1;
      return d;
    }
  }
  throw ConvergenceError(fmt::format("exact_transition: {} unabsorbed mass left after {} trials (n = {}, eps = {})",
                                     remaining + pruned, cap, n, eps),
                         remaining + pruned);
}

TransitionMoments transition_moments(const TransitionDistribution& dist) {
  CompensatedSum mean_sum;
  for (std::int64_t m = 0; m <= dist.support_max; ++m) mean_sum += static_cast<double>(m) * dist.mass(m);
  TransitionMoments out;
  out.mean = mean_sum.value();
  CompensatedSum var_sum;
  for (std::int64_t m = 0; m <= dist.support_max; ++m) {
    const double dev = static_cast<double>(m) - out.mean;
    var_sum += dev * dev * dist.mass(m);
  }
  out.variance = var_sum.value();
  const double edge = static_cast<double>(dist.support_max + 1);
  out.mean_error_bound = dist.tail_mass * edge;
  out.variance_error_bound = dist.tail_mass * (edge - out.mean) * (edge - out.mean) +
                             2.0 * out.mean_error_bound * std::fabs(edge - out.mean);
  return out;
}

BlpParams params_from(const TransitionDistribution& dist, double eps) {
  const auto mom = transition_moments(dist);
  const double n = static_cast<double>(dist.n);
  BlpParams p;
  p.n = dist.n;
  p.truncation_eps = eps;
  p.rho = mom.mean - n;
  p.mu = 1.0 + p.rho / n;
  p.nu = mom.variance / n;
  p.rho_error_bound = mom.mean_error_bound;
  p.nu_error_bound = mom.variance_error_bound / n;
  if (!(p.nu >= 1e-9)) {
    throw DegenerateError(fmt::format("nu({}) = {} is below 1e-9; theta(n) is undefined", dist.n, p.nu));
  }
  p.theta = 2.0 * p.rho / p.nu;
  return p;
}

BlpParams params_exact(const CookieEnvironment& env, std::int64_t n, double eps) {
  return params_from(exact_transition(env, n, eps), eps);
}

double rho_via_wald(const CookieEnvironment& env, const TransitionDistribution& dist) {
  DriftAccumulator delta(env);
  CompensatedSum s;
  const std::int64_t last = dist.n + dist.support_max;
  for (std::int64_t k = 1; k <= last; ++k) {
    const double d = delta.next();
    if (k >= dist.n) s += dist.absorption_time_mass(k) * d;
  }
  return s.value();
}

double rho_via_wald(const CookieEnvironment& env, std::int64_t n, double eps) {
  return rho_via_wald(env, exact_transition(env, n, eps));
}

double expected_half_power_of_negatives(const CookieEnvironment& env, const TransitionDistribution& dist) {
  CompensatedSum s;
  std::int64_t negatives = 0;
  const std::int64_t last = dist.n + dist.support_max;
  for (std::int64_t k = 1; k <= last; ++k) {
    negatives += env.strength(k) < 0.5;
    if (k >= dist.n) s += dist.absorption_time_mass(k) * std::ldexp(1.0, -static_cast<int>(negatives));
  }
  return s.value();
}

TransitionSample sample_transition(const CookieEnvironment& env, std::int64_t n, CounterRng& rng, SamplingMode mode,
                                   std::int64_t trial_cap) {
  if (n < 0) throw DomainError("sample_transition: n must be >= 0");
  if (n == 0) return {};
  const std::int64_t cap = trial_cap > 0 ? trial_cap : default_trial_cap(n);
  return mode == SamplingMode::Coins ? sample_coins(env, n, rng, cap) : sample_blocked(env, n, rng, cap);
}

BlpRunRecord blp_run(const CookieEnvironment& env, std::int64_t z0, CounterRng& rng, std::int64_t max_gen,
                     const BlpRunOptions& options) {
  if (z0 < 0) throw DomainError("blp_run: z0 must be >= 0");
  if (max_gen < 1) throw DomainError("blp_run: max_gen must be >= 1");
  BlpRunRecord rec;
  rec.generations.push_back(z0);
  if (z0 == 0) {
    rec.extinct_at = 0;
    return rec;
  }
  std::int64_t z = z0;
  for (std::int64_t g = 1; g <= max_gen; ++g) {
    z = sample_transition(env, z, rng, options.mode).successes;
    rec.generations.push_back(z);
    if (z == 0) {
      rec.extinct_at = g;
      break;
    }
    if (z > options.size_cap) {
      if (!options.stop_at_cap) {
        throw ResourceError(fmt::format("blp_run: generation {} has size {} above the cap {}", g, z, options.size_cap));
      }
      rec.cap_hit = true;
      break;
    }
  }
  return rec;
}

ExtinctionEstimate extinction_estimate(const CookieEnvironment& env, std::int64_t z0, std::int64_t reps,
                                       std::int64_t max_gen, std::uint64_t seed, unsigned threads,
                                       BlpRunOptions options) {
  if (reps < 1) throw DomainError("extinction_estimate: reps must be >= 1");
  struct Outcome {
    bool extinct = false;
    bool cap_hit = false;
  };
  std::vector<Outcome> outcomes(static_cast<std::size_t>(reps));
  parallel_for(outcomes.size(), threads, [&](std::size_t r) {
    CounterRng rng(seed, r);
    const auto rec = blp_run(env, z0, rng, max_gen, options);
    outcomes[r] = {rec.extinct_at.has_value(), rec.cap_hit};
  });
  ExtinctionEstimate e;
  e.reps = reps;
  for (const auto& o : outcomes) {
    e.extinct += o.extinct;
    e.cap_hits += o.cap_hit;
  }
  e.censored = reps - e.extinct;
  e.fraction = static_cast<double>(e.extinct) / static_cast<double>(reps);
  e.half_width = binomial_half_width(e.extinct, reps);
  return e;
}

// ---------------------------------------------------------------------------------------------

namespace {

// |x - center * n| > eps * n, with x and center * n integers.
bool deviates(std::int64_t x, std::int64_t center, double eps, std::int64_t n) {
  return std::fabs(static_cast<double>(x - center)) > eps * static_cast<double>(n);
}

}  // namespace

double deviation_tail(const TransitionDistribution& dist, double eps) {
  CompensatedSum s;
  for (std::int64_t m = 0; m <= dist.support_max; ++m) {
    if (deviates(m, dist.n, eps, dist.n)) s += dist.mass(m);
  }
  return s.value();
}

double tn_deviation_tail(const TransitionDistribution& dist, double eps) {
  CompensatedSum s;
  for (std::int64_t k = dist.n; k <= dist.n + dist.support_max; ++k) {
    if (deviates(k, 2 * dist.n, eps, dist.n)) s += dist.absorption_time_mass(k);
  }
  return s.value();
}

double concentration_envelope(double c, double eps, std::int64_t n) {
  return 2.0 * std::exp(-c * eps * eps * static_cast<double>(n) / (2.0 + eps));
}

double max_concentration_constant(double tail, double eps, std::int64_t n) {
  if (tail <= 0.0) return std::numeric_limits<double>::infinity();
  return -std::log(tail / 2.0) * (2.0 + eps) / (eps * eps * static_cast<double>(n));
}

namespace {

ConcentrationReport finish_report(double c_ref, std::vector<ConcentrationRow> rows) {
  ConcentrationReport r;
  r.c_ref = c_ref;
  r.fitted_c = std::numeric_limits<double>::infinity();
  r.all_hold = true;
  for (auto& row : rows) {
    row.envelope = concentration_envelope(c_ref, row.eps, row.n);
    row.holds = row.tail_upper <= row.envelope;
    row.c_limit = max_concentration_constant(row.tail_upper, row.eps, row.n);
    r.fitted_c = std::min(r.fitted_c, row.c_limit);
    r.all_hold = r.all_hold && row.holds;
  }
  r.rows = std::move(rows);
  return r;
}

void check_grid(const std::vector<std::int64_t>& n_list, const std::vector<double>& eps_list) {
  if (n_list.empty() || eps_list.empty()) throw DomainError("concentration_check: empty grid");
  for (double e : eps_list) {
    if (!(e > 0.0)) throw DomainError("concentration_check: every eps must be > 0");
  }
  for (auto n : n_list) check_generation_size(n);
}

}  // namespace

ConcentrationReport concentration_check(const CookieEnvironment& env, const std::vector<std::int64_t>& n_list,
                                        const std::vector<double>& eps_list, double c_ref, double dp_eps,
                                        unsigned threads) {
  check_grid(n_list, eps_list);
  std::vector<TransitionDistribution> dists(n_list.size());
  parallel_for(n_list.size(), threads, [&](std::size_t i) { dists[i] = exact_transition(env, n_list[i], dp_eps); });
  std::vector<ConcentrationRow> rows;
  for (const auto& d : dists) {
    for (double e : eps_list) {
      ConcentrationRow row;
      row.n = d.n;
      row.eps = e;
      row.tail = deviation_tail(d, e);
      row.tail_upper = row.tail + d.tail_mass;
      row.tn_tail = tn_deviation_tail(d, e);
      rows.push_back(row);
    }
  }
  return finish_report(c_ref, std::move(rows));
}

ConcentrationReport concentration_check_mc(const CookieEnvironment& env, const std::vector<std::int64_t>& n_list,
                                           const std::vector<double>& eps_list, double c_ref, std::int64_t reps,
                                           std::uint64_t seed, unsigned threads) {
  check_grid(n_list, eps_list);
  if (reps < 1) throw DomainError("concentration_check_mc: reps must be >= 1");
  std::vector<ConcentrationRow> rows;
  for (std::size_t i = 0; i < n_list.size(); ++i) {
    const auto n = n_list[i];
    std::vector<std::int64_t> draws(static_cast<std::size_t>(reps));
    parallel_for(draws.size(), threads, [&](std::size_t r) {
      CounterRng rng(seed, (std::uint64_t{i} << 40) | r);
      draws[r] = sample_transition(env, n, rng, SamplingMode::Blocked).successes;
    });
    for (double e : eps_list) {
      std::int64_t hits = 0;
      for (auto z : draws) hits += deviates(z, n, e, n);
      ConcentrationRow row;
      row.n = n;
      row.eps = e;
      row.tail = static_cast<double>(hits) / static_cast<double>(reps);
      row.tail_upper = row.tail;
      row.tn_tail = row.tail;
      rows.push_back(row);
    }
  }
  return finish_report(c_ref, std::move(rows));
}

}  // namespace erw
