#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "erw/env_spec.hpp"

namespace erw {

/// "erw <version>"; embedded in every manifest and table header.
std::string build_identifier();

/// Grid specification: comma list ("100,1000") or powers of two ("pow2:7..17").
std::vector<std::int64_t> parse_grid(std::string_view spec);

struct ExperimentConfig {
  /// params-table | transient-certificate | concentration | walk-blp-consistency | all
  std::string experiment = "all";
  /// Inline environment used by params-table, transient-certificate and concentration.
  std::string env = "transient-example";
  /// Inline environments compared by walk-blp-consistency.
  std::vector<std::string> envs = {"finite:5/6,5/6,5/6", "placebo"};
  std::vector<std::int64_t> n_grid = parse_grid("pow2:4..17");
  std::vector<std::int64_t> certify_grid = parse_grid("pow2:7..17");
  std::vector<std::int64_t> concentration_n = {50, 200, 1000};
  std::vector<double> eps_grid = {0.2, 0.5, 1.0};
  double c_ref = 1.0 / 16.0;
  double trunc_eps = 1e-12;
  double drift_tol = 1e-9;
  std::int64_t reps = 10'000;
  std::uint64_t seed = 1;
  std::int64_t horizon = 100'000;
  std::int64_t max_gen = 1'000;
  std::int64_t z0 = 1;
  std::filesystem::path out_dir = ".";

  /// Keys: experiment, env, envs (';'-separated), n_grid, certify_grid, concentration_n,
  /// eps_grid, c_ref, trunc_eps, drift_tol, reps, seed, horizon, max_gen, z0, out_dir.
  static ExperimentConfig from_document(const KeyValueDocument& doc);
  static ExperimentConfig load(const std::filesystem::path& path);

  /// Throws DomainError on empty/unsorted grids or an unusable output directory.
  void validate() const;
  /// Sorted key = value lines; out_dir is excluded so relocating outputs keeps the hash.
  std::string canonical() const;
  /// FNV-1a 64 of canonical(), as 16 hex digits.
  std::string hash() const;
};

struct Table {
  std::string name;
  std::string units;
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;
};

/// '#' metadata line, header row, data rows.
std::string render_csv(const Table& table, const std::string& experiment, const std::string& config_hash);

std::vector<Table> exp_params_table(const ExperimentConfig& config, unsigned threads);
std::vector<Table> exp_transient_certificate(const ExperimentConfig& config, unsigned threads);
std::vector<Table> exp_concentration(const ExperimentConfig& config, unsigned threads);
std::vector<Table> exp_walk_blp_consistency(const ExperimentConfig& config, unsigned threads);

struct Artifact {
  std::string file;
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct Manifest {
  std::string build;
  std::string config_hash;
  std::string experiment;
  std::vector<Artifact> artifacts;
};

/// Runs config.experiment (or every experiment for "all"), writes one CSV per table into
/// out_dir plus manifest.json, and returns the manifest.
Manifest run_all(const ExperimentConfig& config, unsigned threads);

std::string sha256_hex(std::string_view bytes);
std::string file_sha256(const std::filesystem::path& path);
Manifest read_manifest(const std::filesystem::path& path);

}  // namespace erw
