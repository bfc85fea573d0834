#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "erw/environment.hpp"
#include "erw/philox.hpp"

namespace erw {

inline constexpr double kDefaultTruncation = 1e-12;

inline std::int64_t default_trial_cap(std::int64_t n) { return 64 * n + 10'000; }

/// One-step law of the forward branching-like process: P_n(Z_1 = m), the number of successes
/// before the n-th failure in independent Bernoulli(p_1), Bernoulli(p_2), ... trials.
struct TransitionDistribution {
  std::int64_t n = 0;
  /// masses[m] = P_n(Z_1 = m) for m = 0..support_max.
  std::vector<double> masses;
  /// Probability not represented in `masses` (unabsorbed + pruned); <= the requested eps.
  double tail_mass = 0.0;
  double unabsorbed_mass = 0.0;
  double pruned_mass = 0.0;
  std::int64_t support_max = -1;
  /// Trials processed by the dynamic program.
  std::int64_t trials = 0;

  double mass(std::int64_t m) const {
    return (m >= 0 && m <= support_max) ? masses[static_cast<std::size_t>(m)] : 0.0;
  }
  /// P(T_n = k) with T_n = Z_1 + n the trial of the n-th failure.
  double absorption_time_mass(std::int64_t k) const { return mass(k - n); }
};

/// Exact law by dynamic programming over (trial, failures so far). The failure-count vector is
/// kept on a band; entries below a tiny threshold at the band edges are dropped and their mass
/// is booked into tail_mass. Throws ConvergenceError when tail_mass cannot be brought below eps
/// within trial_cap trials (default 64 n + 10^4).
TransitionDistribution exact_transition(const CookieEnvironment& env, std::int64_t n,
                                        double eps = kDefaultTruncation, std::int64_t trial_cap = 0);

struct TransitionMoments {
  double mean = 0.0;
  double variance = 0.0;
  /// Truncated mass placed at the support edge: tail_mass * (support_max + 1). Mass lying past
  /// the edge can make the true error slightly larger.
  double mean_error_bound = 0.0;
  double variance_error_bound = 0.0;
};

/// Mean and two-pass variance of the stored masses.
TransitionMoments transition_moments(const TransitionDistribution& dist);

/// mu(n), rho(n), nu(n), theta(n) for one n.
struct BlpParams {
  std::int64_t n = 0;
  double mu = 0.0;
  double rho = 0.0;
  double nu = 0.0;
  double theta = 0.0;
  double truncation_eps = 0.0;
  double rho_error_bound = 0.0;
  double nu_error_bound = 0.0;
};

/// Throws DegenerateError when nu(n) < 1e-9.
BlpParams params_from(const TransitionDistribution& dist, double eps);
BlpParams params_exact(const CookieEnvironment& env, std::int64_t n, double eps = kDefaultTruncation);

/// E[delta_{T_n}] from the absorption-time law, using delta_k accumulated along the cookie
/// sequence. Equals rho(n) by Wald's identity.
double rho_via_wald(const CookieEnvironment& env, const TransitionDistribution& dist);
double rho_via_wald(const CookieEnvironment& env, std::int64_t n, double eps = kDefaultTruncation);

/// E[(1/2)^{C_p(T_n)}] where C_p counts negative cookies; for the transient example with
/// n > 3 this equals rho(n) - 1.
double expected_half_power_of_negatives(const CookieEnvironment& env, const TransitionDistribution& dist);

enum class SamplingMode {
  /// Toss Bernoulli(p_k) coins one by one.
  Coins,
  /// Same law; runs of placebo cookies are resolved with negative-binomial / binomial draws.
  Blocked,
};

struct TransitionSample {
  std::int64_t successes = 0;  ///< Z_1
  std::int64_t trials = 0;     ///< T_n = Z_1 + n
};

/// Draws Z_1 given Z_0 = n. Throws ResourceError past trial_cap (default 64 n + 10^4).
TransitionSample sample_transition(const CookieEnvironment& env, std::int64_t n, CounterRng& rng,
                                   SamplingMode mode = SamplingMode::Coins, std::int64_t trial_cap = 0);

struct BlpRunOptions {
  std::int64_t size_cap = std::int64_t{1} << 40;
  /// Stop and flag cap_hit instead of throwing ResourceError when a generation exceeds size_cap.
  bool stop_at_cap = false;
  SamplingMode mode = SamplingMode::Blocked;
};

struct BlpRunRecord {
  /// generations[g] = Z_g, starting with Z_0.
  std::vector<std::int64_t> generations;
  std::optional<std::int64_t> extinct_at;
  bool cap_hit = false;
};

BlpRunRecord blp_run(const CookieEnvironment& env, std::int64_t z0, CounterRng& rng, std::int64_t max_gen,
                     const BlpRunOptions& options = {});

struct ExtinctionEstimate {
  std::int64_t reps = 0;
  std::int64_t extinct = 0;
  /// Runs that neither died out by max_gen nor were decided (includes cap hits).
  std::int64_t censored = 0;
  std::int64_t cap_hits = 0;
  double fraction = 0.0;  ///< extinct / reps; censored runs count as survivors
  double half_width = 0.0;
  double survival_fraction() const { return 1.0 - fraction; }
};

/// Replication r uses CounterRng(seed, r). Z^- is obtained as Z^+ under reflect(env).
ExtinctionEstimate extinction_estimate(const CookieEnvironment& env, std::int64_t z0, std::int64_t reps,
                                       std::int64_t max_gen, std::uint64_t seed, unsigned threads = 1,
                                       BlpRunOptions options = {.stop_at_cap = true});

/// P_n(|Z_1/n - 1| > eps) from the stored masses.
double deviation_tail(const TransitionDistribution& dist, double eps);
/// P(|T_n/n - 2| > eps) evaluated over the absorption-time law.
double tn_deviation_tail(const TransitionDistribution& dist, double eps);
/// 2 exp(-C eps^2 n / (2 + eps)).
double concentration_envelope(double c, double eps, std::int64_t n);
/// Largest C with tail <= envelope(C); +inf when tail == 0.
double max_concentration_constant(double tail, double eps, std::int64_t n);

struct ConcentrationRow {
  std::int64_t n = 0;
  double eps = 0.0;
  double tail = 0.0;        ///< stored-mass (or Monte Carlo) tail frequency
  double tail_upper = 0.0;  ///< tail + truncated mass
  double tn_tail = 0.0;     ///< P(|T_n/n - 2| > eps) on the same law
  double envelope = 0.0;    ///< at the reference constant
  bool holds = false;
  double c_limit = 0.0;     ///< largest C this point allows
};

struct ConcentrationReport {
  double c_ref = 0.0;
  std::vector<ConcentrationRow> rows;
  double fitted_c = 0.0;  ///< min of c_limit over the grid
  bool all_hold = false;
};

ConcentrationReport concentration_check(const CookieEnvironment& env, const std::vector<std::int64_t>& n_list,
                                        const std::vector<double>& eps_list, double c_ref,
                                        double dp_eps = kDefaultTruncation, unsigned threads = 1);

ConcentrationReport concentration_check_mc(const CookieEnvironment& env, const std::vector<std::int64_t>& n_list,
                                           const std::vector<double>& eps_list, double c_ref, std::int64_t reps,
                                           std::uint64_t seed, unsigned threads = 1);

}  // namespace erw
