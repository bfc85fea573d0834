// erw: excited random walk / forward branching-like process toolkit.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "erw/blp.hpp"
#include "erw/classifier.hpp"
#include "erw/env_spec.hpp"
#include "erw/error.hpp"
#include "erw/experiments.hpp"
#include "erw/parallel.hpp"
#include "erw/walk.hpp"

namespace {

struct EnvOption {
  std::string file;
  std::string inline_spec;

  void add_to(CLI::App* cmd) {
    auto* f = cmd->add_option("--env", file, "Environment spec file");
    auto* i = cmd->add_option("--env-inline", inline_spec, "Inline environment <kind[:args]>");
    f->excludes(i);
  }

  erw::CookieEnvironment load() const {
    if (!file.empty()) return erw::load_env_file(file);
    if (!inline_spec.empty()) return erw::parse_env_inline(inline_spec);
    throw erw::DomainError("one of --env or --env-inline is required");
  }
};

// Writes to the file when a path is given, otherwise to stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw erw::Error(fmt::format("cannot write '{}'", path));
    }
  }
  std::ostream& out() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Excited random walks in identical cookie stacks and their forward branching-like process"};
  app.require_subcommand(1);
  app.set_version_flag("--version", erw::build_identifier());
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);

  EnvOption env_opt;

  // env
  auto* env_cmd = app.add_subcommand("env", "Environment statistics");
  env_opt.add_to(env_cmd);
  std::int64_t env_n = 100;
  double env_tol = 1e-9;
  env_cmd->add_option("--n", env_n, "Index for prefix drift, tail bound and averages");
  env_cmd->add_option("--tol", env_tol, "Tolerance for the total drift");

  // walk
  auto* walk_cmd = app.add_subcommand("walk", "Simulate excited random walks");
  env_opt.add_to(walk_cmd);
  std::uint64_t seed = 1;
  std::int64_t reps = 1;
  std::int64_t horizon = 1000;
  std::string trace_out, summary_out;
  walk_cmd->add_option("--seed", seed);
  walk_cmd->add_option("--reps", reps)->check(CLI::PositiveNumber);
  walk_cmd->add_option("--horizon", horizon)->check(CLI::PositiveNumber);
  walk_cmd->add_option("--trace-out", trace_out, "CSV step,position of replication 0");
  walk_cmd->add_option("--summary-out", summary_out, "CSV rep,returns,first_return,max,min,final");

  // blp
  auto* blp_cmd = app.add_subcommand("blp", "One-step law of the forward branching-like process");
  env_opt.add_to(blp_cmd);
  std::int64_t blp_n = 1;
  double eps = erw::kDefaultTruncation;
  std::string mode = "exact";
  std::string out_path;
  blp_cmd->add_option("--n", blp_n)->check(CLI::PositiveNumber);
  blp_cmd->add_option("--eps", eps, "DP truncation");
  blp_cmd->add_option("--mode", mode)->check(CLI::IsMember({"exact", "mc"}));
  blp_cmd->add_option("--reps", reps);
  blp_cmd->add_option("--seed", seed);
  blp_cmd->add_option("--out", out_path, "CSV m,mass (exact) or rep,z1 (mc)");

  // params
  auto* params_cmd = app.add_subcommand("params", "mu(n), rho(n), nu(n), theta(n)");
  env_opt.add_to(params_cmd);
  std::string grid = "pow2:4..17";
  params_cmd->add_option("--n-grid", grid, "Grid: comma list or pow2:a..b");
  params_cmd->add_option("--eps", eps);
  params_cmd->add_option("--out", out_path, "CSV n,mu,rho,nu,theta,eps_used");

  // classify
  auto* classify_cmd = app.add_subcommand("classify", "Recurrence/transience verdict");
  env_opt.add_to(classify_cmd);
  double tol = 1e-9;
  std::string certify_grid;
  std::string certificate = "survival";
  classify_cmd->add_option("--tol", tol);
  classify_cmd->add_option("--certify", certify_grid, "Grid for the theta(n) certificate");
  classify_cmd->add_option("--certificate", certificate)->check(CLI::IsMember({"survival", "extinction"}));
  classify_cmd->add_option("--eps", eps);
  classify_cmd->add_option("--out", out_path, "CSV n,theta,threshold,margin plus a verdict line");

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Run reproducible experiments from a config file");
  std::string config_path, out_dir, experiment;
  exp_cmd->add_option("--config", config_path)->required();
  exp_cmd->add_option("--out-dir", out_dir, "Overrides out_dir from the config");
  exp_cmd->add_option("--experiment", experiment, "Overrides experiment from the config");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*env_cmd) {
      const auto env = env_opt.load();
      const auto stats = erw::env_stats(env, env_n);
      std::cout << fmt::format("env = {}\n", env.describe());
      std::cout << fmt::format("drift_prefix({}) = {}\n", env_n, erw::drift_prefix(env, env_n));
      std::cout << fmt::format("tail_bound({}) = {}\n", env_n + 1, erw::tail_bound(env, env_n + 1));
      std::cout << fmt::format("mean_strength = {}\nvariance_avg = {}\nbessel_gap = {}\n", stats.mean_strength,
                               stats.variance_avg, stats.bessel_gap);
      std::cout << fmt::format("neg_cookie_count({}) = {}\n", env_n, erw::neg_cookie_count(env, env_n));
      try {
        const auto delta = erw::total_drift(env, env_tol);
        std::cout << fmt::format("total_drift = {}\ntotal_drift_error = {}\n", delta.value, delta.error);
      } catch (const erw::UnsupportedError& e) {
        std::cout << fmt::format("total_drift = unavailable ({})\n", e.what());
      }
      return 0;
    }

    if (*walk_cmd) {
      const auto env = env_opt.load();
      if (!trace_out.empty()) {
        erw::WalkOptions opts;
        opts.record_trace = true;
        const auto s = erw::run(env, seed, 0, horizon, opts);
        Sink sink(trace_out);
        sink.out() << "step,position\n";
        for (std::size_t t = 0; t < s.trace.size(); ++t) sink.out() << t << ',' << s.trace[t] << '\n';
      }
      const auto runs = erw::run_replications(env, seed, horizon, reps, threads);
      if (!summary_out.empty()) {
        Sink sink(summary_out);
        sink.out() << "rep,returns,first_return,max,min,final\n";
        for (std::size_t r = 0; r < runs.size(); ++r) {
          const auto& s = runs[r];
          sink.out() << fmt::format("{},{},{},{},{},{}\n", r, s.returns_to_origin,
                                    s.first_return_time ? fmt::format("{}", *s.first_return_time) : "",
                                    s.max_position, s.min_position, s.final_position);
        }
      }
      std::int64_t right = 0, left = 0, returned = 0;
      for (const auto& s : runs) {
        right += s.final_position > 0;
        left += s.final_position < 0;
        returned += s.returns_to_origin > 0;
      }
      const double n = static_cast<double>(runs.size());
      std::cout << fmt::format("env = {}\nreps = {}\nhorizon = {}\nright_fraction = {}\nleft_fraction = {}\n"
                               "returned_fraction = {}\n",
                               env.describe(), runs.size(), horizon, right / n, left / n, returned / n);
      return 0;
    }

    if (*blp_cmd) {
      const auto env = env_opt.load();
      Sink sink(out_path);
      if (mode == "exact") {
        const auto dist = erw::exact_transition(env, blp_n, eps);
        sink.out() << "m,mass\n";
        for (std::int64_t m = 0; m <= dist.support_max; ++m) sink.out() << fmt::format("{},{}\n", m, dist.mass(m));
        if (!out_path.empty()) {
          const auto p = erw::params_from(dist, eps);
          std::cout << fmt::format("n = {}\ntail_mass = {}\nmu = {}\nrho = {}\nnu = {}\ntheta = {}\n", blp_n,
                                   dist.tail_mass, p.mu, p.rho, p.nu, p.theta);
        }
      } else {
        if (reps < 1) throw erw::DomainError("--reps must be >= 1");
        sink.out() << "rep,z1\n";
        for (std::int64_t r = 0; r < reps; ++r) {
          erw::CounterRng rng(seed, static_cast<std::uint64_t>(r));
          sink.out() << fmt::format("{},{}\n", r, erw::sample_transition(env, blp_n, rng).successes);
        }
      }
      return 0;
    }

    if (*params_cmd) {
      const auto env = env_opt.load();
      const auto ns = erw::parse_grid(grid);
      std::vector<erw::BlpParams> params(ns.size());
      erw::parallel_for(ns.size(), threads, [&](std::size_t i) { params[i] = erw::params_exact(env, ns[i], eps); });
      Sink sink(out_path);
      sink.out() << "n,mu,rho,nu,theta,eps_used\n";
      for (const auto& p : params) {
        sink.out() << fmt::format("{},{},{},{},{},{}\n", p.n, p.mu, p.rho, p.nu, p.theta, p.truncation_eps);
      }
      return 0;
    }

    if (*classify_cmd) {
      const auto env = env_opt.load();
      auto result = erw::classify(env, tol);
      std::optional<erw::CertificateReport> cert;
      if (!certify_grid.empty()) {
        const auto ns = erw::parse_grid(certify_grid);
        cert = certificate == "survival" ? erw::certify_survival(env, ns, eps, threads)
                                         : erw::certify_extinction(env, ns, eps, threads);
        result.evidence = cert->points;
      }
      const auto verdict_line = fmt::format(
          "# verdict={} delta={} delta_error={} tail_condition={}{}", erw::to_string(result.verdict),
          result.delta.value, result.delta.error, erw::to_string(result.tail_condition),
          cert ? fmt::format(" certificate={} all_margins_positive={}", cert->kind, cert->all_positive ? 1 : 0) : "");
      Sink sink(out_path);
      sink.out() << "n,theta,threshold,margin\n";
      for (const auto& p : result.evidence) {
        sink.out() << fmt::format("{},{},{},{}\n", p.n, p.theta, p.threshold, p.margin);
      }
      sink.out() << verdict_line << '\n';
      if (!out_path.empty()) std::cout << verdict_line.substr(2) << '\n';
      return result.verdict == erw::Verdict::Undetermined ? 2 : 0;
    }

    if (*exp_cmd) {
      auto config = erw::ExperimentConfig::load(config_path);
      if (!out_dir.empty()) config.out_dir = out_dir;
      if (!experiment.empty()) config.experiment = experiment;
      const auto manifest = erw::run_all(config, threads);
      std::cout << fmt::format("build = {}\nconfig_hash = {}\n", manifest.build, manifest.config_hash);
      for (const auto& a : manifest.artifacts) {
        std::cout << fmt::format("{}  {}\n", a.sha256, (config.out_dir / a.file).string());
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
