#pragma once

// Run configuration shared by every CLI subcommand. Serialized as JSON with
// a schema version; unknown keys are rejected so typos never pass silently.
// Precedence: built-in defaults < config file < command-line flags.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "hapt/error.hpp"
#include "hapt/node_posterior.hpp"
#include "hapt/partition.hpp"
#include "hapt/simgen.hpp"
#include "hapt/sis_prior.hpp"

namespace hapt {

inline constexpr int kConfigSchemaVersion = 1;

struct DpmConfig {
  double alpha = 1.0;
  std::size_t burnin = 500;
  std::size_t draws = 1000;
  bool operator==(const DpmConfig&) const = default;
};

struct RunConfig {
  int depth = 10;
  std::optional<Interval> domain;  // nullopt = auto from the data
  std::size_t state_count = 4;
  double beta_tau = 1.0;
  double beta_nu = 1.0;
  std::vector<double> boundaries_tau;  // empty = 4^j starting at 1
  std::vector<double> boundaries_nu;
  std::vector<double> root_dist_tau;  // empty = uniform
  std::vector<double> root_dist_nu;
  QuadratureOptions quadrature{};
  std::size_t grid = 1024;
  DpmConfig dpm{};
  std::uint64_t seed = 1;
  unsigned threads = 1;
  std::string output_dir = ".";
  // simulate only
  std::string scenario = "s1";
  std::size_t n_samples = 10;
  std::size_t n_obs = 100;
  double dirichlet_total = 10.0;

  SisConfig tau_config() const { return make_sis(boundaries_tau, beta_tau, root_dist_tau); }
  SisConfig nu_config() const { return make_sis(boundaries_nu, beta_nu, root_dist_nu); }

  void validate() const {
    if (depth < 1 || depth > 30) throw InvalidArgument("depth must lie in [1, 30]");
    if (domain && !(std::isfinite(domain->lo) && std::isfinite(domain->hi) && domain->lo < domain->hi))
      throw InvalidArgument("domain must satisfy lo < hi");
    (void)tau_config();
    (void)nu_config();
    if (!(quadrature.tolerance > 0.0 && quadrature.tolerance < 1.0))
      throw InvalidArgument("quadrature tolerance must lie in (0, 1)");
    if (quadrature.outer_budget < 1 || quadrature.inner_budget < 1)
      throw InvalidArgument("quadrature budgets must be >= 1");
    if (grid < 2) throw InvalidArgument("grid must be >= 2");
    if (!(dpm.alpha > 0.0) || !std::isfinite(dpm.alpha)) throw InvalidArgument("dpm.alpha must be > 0");
    if (threads < 1) throw InvalidArgument("threads must be >= 1");
    (void)parse_scenario(scenario);
    if (n_samples < 1 || n_obs < 1) throw InvalidArgument("n_samples and n_obs must be >= 1");
    if (!(dirichlet_total > 0.0) || !std::isfinite(dirichlet_total))
      throw InvalidArgument("dirichlet_total must be > 0");
  }

  bool operator==(const RunConfig& o) const {
    auto same_domain = [](const std::optional<Interval>& a, const std::optional<Interval>& b) {
      if (a.has_value() != b.has_value()) return false;
      return !a || (a->lo == b->lo && a->hi == b->hi);
    };
    return depth == o.depth && same_domain(domain, o.domain) && state_count == o.state_count &&
           beta_tau == o.beta_tau && beta_nu == o.beta_nu && boundaries_tau == o.boundaries_tau &&
           boundaries_nu == o.boundaries_nu && root_dist_tau == o.root_dist_tau && root_dist_nu == o.root_dist_nu &&
           quadrature.tolerance == o.quadrature.tolerance && quadrature.outer_budget == o.quadrature.outer_budget &&
           quadrature.inner_budget == o.quadrature.inner_budget && grid == o.grid && dpm == o.dpm &&
           seed == o.seed && threads == o.threads && output_dir == o.output_dir && scenario == o.scenario &&
           n_samples == o.n_samples && n_obs == o.n_obs && dirichlet_total == o.dirichlet_total;
  }

 private:
  SisConfig make_sis(const std::vector<double>& boundaries, double beta, const std::vector<double>& root) const {
    SisConfig c;
    if (boundaries.empty()) {
      c = default_config(state_count);
      c.beta = beta;
    } else {
      if (boundaries.size() != state_count)
        throw InvalidArgument("boundaries need state_count = " + std::to_string(state_count) + " cut points, got " +
                              std::to_string(boundaries.size()));
      c = SisConfig::from_boundaries(boundaries, beta);
    }
    if (!root.empty()) c.root_dist = root;
    c.validate();
    return c;
  }
};

inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["depth"] = c.depth;
  if (c.domain)
    j["domain"] = {c.domain->lo, c.domain->hi};
  else
    j["domain"] = "auto";
  j["state_count"] = c.state_count;
  j["beta_tau"] = c.beta_tau;
  j["beta_nu"] = c.beta_nu;
  j["boundaries_tau"] = c.boundaries_tau;
  j["boundaries_nu"] = c.boundaries_nu;
  j["root_dist_tau"] = c.root_dist_tau;
  j["root_dist_nu"] = c.root_dist_nu;
  j["quadrature"] = {{"tolerance", c.quadrature.tolerance},
                     {"outer_budget", c.quadrature.outer_budget},
                     {"inner_budget", c.quadrature.inner_budget}};
  j["grid"] = c.grid;
  j["dpm"] = {{"alpha", c.dpm.alpha}, {"burnin", c.dpm.burnin}, {"draws", c.dpm.draws}};
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["output_dir"] = c.output_dir;
  j["scenario"] = c.scenario;
  j["n_samples"] = c.n_samples;
  j["n_obs"] = c.n_obs;
  j["dirichlet_total"] = c.dirichlet_total;
  return j;
}

namespace detail {

template <class T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  if constexpr (std::is_integral_v<T>) {
    const auto& v = j.at(key);
    // Integers built in code are signed even when nonnegative.
    const bool ok = v.is_number_unsigned() || (v.is_number_integer() && (!std::is_unsigned_v<T> || v.get<std::int64_t>() >= 0));
    if (!ok)
      throw InvalidArgument("config field '" + where + key + "' must be " +
                            (std::is_unsigned_v<T> ? "a nonnegative integer" : "an integer"));
  }
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument("config field '" + where + key + "' has the wrong type: " + e.what());
  }
}

inline void reject_unknown(const nlohmann::json& j, const std::vector<std::string>& known, const std::string& where) {
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const auto& name : known) ok = ok || name == k;
    if (!ok) throw InvalidArgument("unknown config field '" + where + k + "'");
  }
}

}  // namespace detail

// Fields absent from `j` keep the values already in `base`.
inline RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {}) {
  if (!j.is_object()) throw InvalidArgument("config must be a JSON object");
  detail::reject_unknown(j,
                         {"schema_version", "depth", "domain", "state_count", "beta_tau", "beta_nu", "boundaries_tau",
                          "boundaries_nu", "root_dist_tau", "root_dist_nu", "quadrature", "grid", "dpm", "seed",
                          "threads", "output_dir", "scenario", "n_samples", "n_obs", "dirichlet_total"},
                         "");
  if (j.contains("schema_version") && j.at("schema_version") != kConfigSchemaVersion)
    throw InvalidArgument("unsupported config schema_version " + j.at("schema_version").dump());
  RunConfig c = std::move(base);
  detail::read_field(j, "depth", c.depth, "");
  if (j.contains("domain")) {
    const auto& d = j.at("domain");
    if (d.is_string() && d.get<std::string>() == "auto") {
      c.domain.reset();
    } else if (d.is_array() && d.size() == 2 && d[0].is_number() && d[1].is_number()) {
      c.domain = Interval{d[0].get<double>(), d[1].get<double>()};
    } else {
      throw InvalidArgument("config field 'domain' must be \"auto\" or [lo, hi]");
    }
  }
  detail::read_field(j, "state_count", c.state_count, "");
  detail::read_field(j, "beta_tau", c.beta_tau, "");
  detail::read_field(j, "beta_nu", c.beta_nu, "");
  detail::read_field(j, "boundaries_tau", c.boundaries_tau, "");
  detail::read_field(j, "boundaries_nu", c.boundaries_nu, "");
  detail::read_field(j, "root_dist_tau", c.root_dist_tau, "");
  detail::read_field(j, "root_dist_nu", c.root_dist_nu, "");
  if (j.contains("quadrature")) {
    const auto& q = j.at("quadrature");
    detail::reject_unknown(q, {"tolerance", "outer_budget", "inner_budget"}, "quadrature.");
    detail::read_field(q, "tolerance", c.quadrature.tolerance, "quadrature.");
    detail::read_field(q, "outer_budget", c.quadrature.outer_budget, "quadrature.");
    detail::read_field(q, "inner_budget", c.quadrature.inner_budget, "quadrature.");
  }
  detail::read_field(j, "grid", c.grid, "");
  if (j.contains("dpm")) {
    const auto& d = j.at("dpm");
    detail::reject_unknown(d, {"alpha", "burnin", "draws"}, "dpm.");
    detail::read_field(d, "alpha", c.dpm.alpha, "dpm.");
    detail::read_field(d, "burnin", c.dpm.burnin, "dpm.");
    detail::read_field(d, "draws", c.dpm.draws, "dpm.");
  }
  detail::read_field(j, "seed", c.seed, "");
  detail::read_field(j, "threads", c.threads, "");
  detail::read_field(j, "output_dir", c.output_dir, "");
  detail::read_field(j, "scenario", c.scenario, "");
  detail::read_field(j, "n_samples", c.n_samples, "");
  detail::read_field(j, "n_obs", c.n_obs, "");
  detail::read_field(j, "dirichlet_total", c.dirichlet_total, "");
  c.validate();
  return c;
}

inline RunConfig load_config(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("config file '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, std::move(base));
}

// Markdown reference of every config field and its default.
inline std::string config_reference() {
  const RunConfig d;
  const auto j = to_json(d);
  struct Row {
    const char* key;
    const char* doc;
  };
  static const Row rows[] = {
      {"schema_version", "config schema version; must equal the value shown"},
      {"depth", "truncation depth L of the dyadic partition, 1..30"},
      {"domain", "\"auto\" (data range widened by 0.1% on the left) or [lo, hi]"},
      {"state_count", "shrinkage states per chain, including complete shrinkage"},
      {"beta_tau", "stickiness of the tau chain transition kernel"},
      {"beta_nu", "stickiness of the nu chain transition kernel"},
      {"boundaries_tau", "state_count cut points for the tau supports; [] = 1, 4, 16, ..."},
      {"boundaries_nu", "state_count cut points for the nu supports; [] = 1, 4, 16, ..."},
      {"root_dist_tau", "root state distribution of the tau chain; [] = uniform"},
      {"root_dist_nu", "root state distribution of the nu chain; [] = uniform"},
      {"quadrature", "tolerance (relative, per node) and panel budgets"},
      {"grid", "number of grid points in density and dispersion tables"},
      {"dpm", "Dirichlet-process concentration, burn-in sweeps and retained draws"},
      {"seed", "seed of every random stream"},
      {"threads", "worker thread cap; outputs do not depend on it"},
      {"output_dir", "directory receiving every output file"},
      {"scenario", "simulate: s1, s2, s3, disp, clust or clust_het"},
      {"n_samples", "simulate: number of samples"},
      {"n_obs", "simulate: observations per sample"},
      {"dirichlet_total", "simulate: Dirichlet total for s1-s3 weights"},
  };
  std::ostringstream os;
  os << "# hapt configuration reference\n\n"
     << "Config files are JSON objects. Every field is optional; command-line flags override the file.\n\n"
     << "| field | default | meaning |\n|---|---|---|\n";
  for (const auto& r : rows) os << "| `" << r.key << "` | `" << j.at(r.key).dump() << "` | " << r.doc << " |\n";
  return os.str();
}

}  // namespace hapt
