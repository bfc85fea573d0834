#include "erw/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "erw/blp.hpp"
#include "erw/classifier.hpp"
#include "erw/error.hpp"
#include "erw/parallel.hpp"
#include "erw/stats.hpp"
#include "erw/walk.hpp"

#ifndef ERW_VERSION
#define ERW_VERSION "0.0.0"
#endif

namespace erw {

std::string build_identifier() { return "erw " ERW_VERSION; }

namespace {

std::string num(double x) { return fmt::format("{}", x); }
std::string num(std::int64_t x) { return fmt::format("{}", x); }

std::int64_t parse_int(std::string_view text) {
  std::int64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
    throw DomainError(fmt::format("'{}' is not an integer", text));
  }
  return value;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

template <class T>
std::string join(const std::vector<T>& v, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    if constexpr (std::is_same_v<T, std::string>) {
      out += v[i];
    } else {
      out += num(v[i]);
    }
  }
  return out;
}

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace

std::vector<std::int64_t> parse_grid(std::string_view spec) {
  spec = trim(spec);
  std::vector<std::int64_t> out;
  if (spec.starts_with("pow2:")) {
    const auto body = spec.substr(5);
    const auto dots = body.find("..");
    if (dots == std::string_view::npos) throw DomainError(fmt::format("grid '{}': expected pow2:a..b", spec));
    const auto a = parse_int(trim(body.substr(0, dots)));
    const auto b = parse_int(trim(body.substr(dots + 2)));
    if (a < 0 || b > 62 || a > b) throw DomainError(fmt::format("grid '{}': exponents out of range", spec));
    for (auto k = a; k <= b; ++k) out.push_back(std::int64_t{1} << k);
    return out;
  }
  std::size_t start = 0;
  while (start <= spec.size()) {
    const auto comma = spec.find(',', start);
    out.push_back(parse_int(trim(spec.substr(start, comma == std::string_view::npos ? comma : comma - start))));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

ExperimentConfig ExperimentConfig::from_document(const KeyValueDocument& doc) {
  ExperimentConfig c;
  for (const auto& e : doc.entries()) {
    try {
      const std::string_view v = e.value;
      if (e.key == "experiment") {
        c.experiment = e.value;
      } else if (e.key == "env") {
        parse_env_inline(v);
        c.env = e.value;
      } else if (e.key == "envs") {
        c.envs.clear();
        std::size_t start = 0;
        while (start <= v.size()) {
          const auto semi = v.find(';', start);
          const auto part = std::string(trim(v.substr(start, semi == std::string_view::npos ? semi : semi - start)));
          parse_env_inline(part);
          c.envs.push_back(part);
          if (semi == std::string_view::npos) break;
          start = semi + 1;
        }
      } else if (e.key == "n_grid") {
        c.n_grid = parse_grid(v);
      } else if (e.key == "certify_grid") {
        c.certify_grid = parse_grid(v);
      } else if (e.key == "concentration_n") {
        c.concentration_n = parse_grid(v);
      } else if (e.key == "eps_grid") {
        c.eps_grid = parse_number_list(v);
      } else if (e.key == "c_ref") {
        c.c_ref = parse_number(v);
      } else if (e.key == "trunc_eps") {
        c.trunc_eps = parse_number(v);
      } else if (e.key == "drift_tol") {
        c.drift_tol = parse_number(v);
      } else if (e.key == "reps") {
        c.reps = parse_int(v);
      } else if (e.key == "seed") {
        c.seed = static_cast<std::uint64_t>(parse_int(v));
      } else if (e.key == "horizon") {
        c.horizon = parse_int(v);
      } else if (e.key == "max_gen") {
        c.max_gen = parse_int(v);
      } else if (e.key == "z0") {
        c.z0 = parse_int(v);
      } else if (e.key == "out_dir") {
        c.out_dir = e.value;
      } else {
        throw ParseError(fmt::format("line {}: unknown key '{}'", e.line, e.key), e.line, e.key);
      }
    } catch (const ParseError&) {
      throw;
    } catch (const Error& ex) {
      throw ParseError(fmt::format("line {}: key '{}': {}", e.line, e.key, ex.what()), e.line, e.key);
    }
  }
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  return from_document(KeyValueDocument::load(path));
}

void ExperimentConfig::validate() const {
  static const std::vector<std::string> known{"params-table", "transient-certificate", "concentration",
                                              "walk-blp-consistency", "all"};
  if (std::find(known.begin(), known.end(), experiment) == known.end()) {
    throw DomainError(fmt::format("unknown experiment '{}'", experiment));
  }
  auto check = [](const auto& grid, const char* name) {
    if (grid.empty()) throw DomainError(fmt::format("{} must be non-empty", name));
    if (!std::is_sorted(grid.begin(), grid.end())) throw DomainError(fmt::format("{} must be sorted", name));
  };
  check(n_grid, "n_grid");
  check(certify_grid, "certify_grid");
  check(concentration_n, "concentration_n");
  check(eps_grid, "eps_grid");
  if (envs.empty()) throw DomainError("envs must be non-empty");
  if (reps < 1 || horizon < 1 || max_gen < 1 || z0 < 0) throw DomainError("reps, horizon, max_gen must be >= 1");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir)) {
    throw DomainError(fmt::format("output directory '{}' is not usable", out_dir.string()));
  }
}

std::string ExperimentConfig::canonical() const {
  std::map<std::string, std::string> kv{
      {"experiment", experiment},
      {"env", env},
      {"envs", join(envs, ";")},
      {"n_grid", join(n_grid, ",")},
      {"certify_grid", join(certify_grid, ",")},
      {"concentration_n", join(concentration_n, ",")},
      {"eps_grid", join(eps_grid, ",")},
      {"c_ref", num(c_ref)},
      {"trunc_eps", num(trunc_eps)},
      {"drift_tol", num(drift_tol)},
      {"reps", num(reps)},
      {"seed", fmt::format("{}", seed)},
      {"horizon", num(horizon)},
      {"max_gen", num(max_gen)},
      {"z0", num(z0)},
  };
  std::string out;
  for (const auto& [k, v] : kv) out += fmt::format("{} = {}\n", k, v);
  return out;
}

std::string ExperimentConfig::hash() const { return fmt::format("{:016x}", fnv1a(canonical())); }

std::string render_csv(const Table& table, const std::string& experiment, const std::string& config_hash) {
  std::string out = fmt::format("# table={} experiment={} config_hash={} build={} units={}\n", table.name,
                                experiment, config_hash, build_identifier(), table.units);
  out += join(table.columns, ",");
  out += '\n';
  for (const auto& row : table.rows) {
    out += join(row, ",");
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------------------------

std::vector<Table> exp_params_table(const ExperimentConfig& config, unsigned threads) {
  const auto env = parse_env_inline(config.env);
  const double delta = total_drift(env, config.drift_tol).value;
  std::vector<BlpParams> params(config.n_grid.size());
  std::vector<EnvStats> stats(config.n_grid.size());
  parallel_for(config.n_grid.size(), threads, [&](std::size_t i) {
    params[i] = params_exact(env, config.n_grid[i], config.trunc_eps);
    stats[i] = env_stats(env, config.n_grid[i]);
  });
  Table t{"params_table",
          "dimensionless; n is a generation size",
          {"n", "mu", "rho", "nu", "theta", "abs_rho_minus_delta", "abs_nu_minus_2", "n_rate", "b_n", "b_rate",
           "rho_error_bound", "eps_used"},
          {}};
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = params[i];
    const double n = static_cast<double>(p.n);
    const double ln = std::log(n);
    const double b = stats[i].bessel_gap;
    const double b_rate = b > 0.0 ? b * std::pow(std::log(1.0 / b), 4) : 0.0;
    t.rows.push_back({num(p.n), num(p.mu), num(p.rho), num(p.nu), num(p.theta), num(std::fabs(p.rho - delta)),
                      num(std::fabs(p.nu - 2.0)), num(std::pow(ln, 4) / std::sqrt(n)), num(b), num(b_rate),
                      num(p.rho_error_bound), num(p.truncation_eps)});
  }
  return {t};
}

namespace {

Table extinction_table(const CookieEnvironment& env, const ExperimentConfig& config, unsigned threads) {
  Table t{"certificate_extinction",
          "counts and fractions of replications",
          {"process", "env", "z0", "reps", "max_gen", "extinct", "censored", "cap_hits", "extinct_fraction",
           "half_width"},
          {}};
  const std::pair<const char*, CookieEnvironment> processes[] = {{"Z+", env}, {"Z-", reflect(env)}};
  for (const auto& [name, e] : processes) {
    const auto est = extinction_estimate(e, config.z0, config.reps, config.max_gen, config.seed + 1, threads);
    t.rows.push_back({name, env.describe(), num(config.z0), num(est.reps), num(config.max_gen), num(est.extinct),
                      num(est.censored), num(est.cap_hits), num(est.fraction), num(est.half_width)});
  }
  return t;
}

Table certificate_table(const CertificateReport& rep, const std::string& name) {
  Table t{name, "dimensionless", {"n", "theta", "threshold", "margin"}, {}};
  for (const auto& p : rep.points) t.rows.push_back({num(p.n), num(p.theta), num(p.threshold), num(p.margin)});
  return t;
}

}  // namespace

std::vector<Table> exp_transient_certificate(const ExperimentConfig& config, unsigned threads) {
  const auto env = parse_env_inline(config.env);
  const auto survival = certify_survival(env, config.certify_grid, config.trunc_eps, threads);
  const auto dir = direction_stats(env, config.seed, config.horizon, config.reps, threads);
  Table direction{"certificate_direction",
                  "counts and fractions of replications; horizon in steps",
                  {"env", "horizon", "reps", "right", "left", "zero", "right_fraction", "left_fraction",
                   "zero_fraction"},
                  {{env.describe(), num(config.horizon), num(dir.reps), num(dir.right), num(dir.left), num(dir.zero),
                    num(dir.right_fraction()), num(dir.left_fraction()), num(dir.zero_fraction())}}};
  return {certificate_table(survival, "certificate_survival"), extinction_table(env, config, threads), direction};
}

std::vector<Table> exp_concentration(const ExperimentConfig& config, unsigned threads) {
  const auto env = parse_env_inline(config.env);
  const auto rep = concentration_check(env, config.concentration_n, config.eps_grid, config.c_ref, config.trunc_eps,
                                       threads);
  Table rows{"concentration",
             "probabilities; eps is relative deviation",
             {"n", "eps", "tail", "tail_upper", "tn_tail", "envelope", "holds", "c_limit"},
             {}};
  for (const auto& r : rep.rows) {
    rows.rows.push_back({num(r.n), num(r.eps), num(r.tail), num(r.tail_upper), num(r.tn_tail), num(r.envelope),
                         r.holds ? "1" : "0", num(r.c_limit)});
  }
  Table fit{"concentration_fit", "dimensionless", {"env", "c_ref", "fitted_c", "all_hold"},
            {{env.describe(), num(rep.c_ref), num(rep.fitted_c), rep.all_hold ? "1" : "0"}}};
  return {rows, fit};
}

std::vector<Table> exp_walk_blp_consistency(const ExperimentConfig& config, unsigned threads) {
  Table t{"walk_blp_consistency",
          "fractions of replications; horizon in steps; max_gen in generations",
          {"env", "delta", "horizon", "walk_reps", "walk_first_right", "walk_escaped_right", "walk_escape_fraction",
           "walk_escape_hw", "walk_return_fraction", "walk_return_hw", "max_gen", "blp_reps", "blp_extinct_fraction",
           "blp_survival_fraction", "blp_hw", "blp_censored"},
          {}};
  for (const auto& spec : config.envs) {
    const auto env = parse_env_inline(spec);
    const double delta = total_drift(env, config.drift_tol).value;
    const auto walk = excursion_stats(env, config.seed, config.horizon, config.reps, threads);
    const auto blp = extinction_estimate(env, 1, config.reps, config.max_gen, config.seed + 1, threads);
    t.rows.push_back({env.describe(), num(delta), num(config.horizon), num(walk.reps), num(walk.first_right),
                      num(walk.escaped_right), num(walk.escape_fraction()),
                      num(binomial_half_width(walk.escaped_right, walk.first_right)), num(walk.return_fraction()),
                      num(binomial_half_width(walk.returned, walk.reps)), num(config.max_gen), num(blp.reps),
                      num(blp.fraction), num(blp.survival_fraction()), num(blp.half_width), num(blp.censored)});
  }
  return {t};
}

// ---------------------------------------------------------------------------------------------

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 computation failed");
  }
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string file_sha256(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot read '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

Manifest run_all(const ExperimentConfig& config, unsigned threads) {
  config.validate();
  const auto hash = config.hash();
  Manifest manifest{build_identifier(), hash, config.experiment, {}};

  auto emit = [&](const std::string& id, const std::vector<Table>& tables) {
    for (const auto& table : tables) {
      const auto text = render_csv(table, id, hash);
      const auto file = table.name + ".csv";
      std::ofstream out(config.out_dir / file, std::ios::binary);
      out << text;
      if (!out) throw Error(fmt::format("failed writing '{}'", (config.out_dir / file).string()));
      manifest.artifacts.push_back({file, sha256_hex(text), text.size()});
    }
  };
  const bool all = config.experiment == "all";
  if (all || config.experiment == "params-table") emit("params-table", exp_params_table(config, threads));
  if (all || config.experiment == "transient-certificate") {
    emit("transient-certificate", exp_transient_certificate(config, threads));
  }
  if (all || config.experiment == "concentration") emit("concentration", exp_concentration(config, threads));
  if (all || config.experiment == "walk-blp-consistency") {
    emit("walk-blp-consistency", exp_walk_blp_consistency(config, threads));
  }

  nlohmann::ordered_json j;
  j["build"] = manifest.build;
  j["config_hash"] = manifest.config_hash;
  j["experiment"] = manifest.experiment;
  j["artifacts"] = nlohmann::ordered_json::array();
  for (const auto& a : manifest.artifacts) {
    j["artifacts"].push_back({{"file", a.file}, {"sha256", a.sha256}, {"bytes", a.bytes}});
  }
  std::ofstream out(config.out_dir / "manifest.json", std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw Error("failed writing manifest.json");
  return manifest;
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(fmt::format("cannot open '{}'", path.string()));
  const auto j = nlohmann::json::parse(in);
  Manifest m;
  m.build = j.at("build").get<std::string>();
  m.config_hash = j.at("config_hash").get<std::string>();
  m.experiment = j.at("experiment").get<std::string>();
  for (const auto& a : j.at("artifacts")) {
    m.artifacts.push_back({a.at("file").get<std::string>(), a.at("sha256").get<std::string>(),
                           a.at("bytes").get<std::uintmax_t>()});
  }
  return m;
}

}  // namespace erw
