#pragma once

// Command-line front end. `run` is the whole program; the executable only
// forwards argv. Failures print one line `error: <code>: <message>` on the
// error stream and return a nonzero status (2 for usage errors, 1 otherwise).
//
// Every output file lands in the configured output directory under a fixed
// name, so a run is fully described by its config and its flags.

#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hapt/config.hpp"
#include "hapt/dispersion.hpp"
#include "hapt/dpm.hpp"
#include "hapt/error.hpp"
#include "hapt/ingest.hpp"
#include "hapt/serialize.hpp"
#include "hapt/simgen.hpp"
#include "hapt/tree_hmm.hpp"

namespace hapt::app {

namespace fs = std::filesystem;

// Flags shared by the subcommands; unset flags leave the config untouched.
struct Overrides {
  std::string config_path;
  std::optional<int> depth;
  std::optional<std::string> domain;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::size_t> grid;
  std::optional<std::string> scenario;
  std::optional<double> alpha;
  std::optional<std::size_t> burnin;
  std::optional<std::size_t> draws;
  std::optional<std::string> out_dir;
  std::optional<double> tolerance;
  std::optional<std::size_t> n_samples;
  std::optional<std::size_t> n_obs;
  std::optional<double> dirichlet_total;

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_config(config_path);
    if (depth) c.depth = *depth;
    if (domain) c.domain = parse_domain(*domain);
    if (seed) c.seed = *seed;
    if (threads) c.threads = *threads;
    if (grid) c.grid = *grid;
    if (scenario) c.scenario = *scenario;
    if (alpha) c.dpm.alpha = *alpha;
    if (burnin) c.dpm.burnin = *burnin;
    if (draws) c.dpm.draws = *draws;
    if (out_dir) c.output_dir = *out_dir;
    if (tolerance) c.quadrature.tolerance = *tolerance;
    if (n_samples) c.n_samples = *n_samples;
    if (n_obs) c.n_obs = *n_obs;
    if (dirichlet_total) c.dirichlet_total = *dirichlet_total;
    c.validate();
    return c;
  }

  static std::optional<Interval> parse_domain(const std::string& s) {
    if (s == "auto") return std::nullopt;
    const auto comma = s.find(',');
    double lo = 0.0, hi = 0.0;
    if (comma == std::string::npos || !detail::parse_double(detail::trim(s.substr(0, comma)), lo) ||
        !detail::parse_double(detail::trim(s.substr(comma + 1)), hi))
      throw InvalidArgument("--domain must be 'auto' or 'lo,hi', got '" + s + "'");
    if (!(std::isfinite(lo) && std::isfinite(hi) && lo < hi)) throw InvalidArgument("--domain needs finite lo < hi");
    return Interval{lo, hi};
  }
};

inline fs::path out_path(const RunConfig& c, const std::string& name) {
  const fs::path dir(c.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + c.output_dir + "': " + ec.message());
  return dir / name;
}

inline std::string table_text(const Table& t) {
  std::ostringstream os;
  write_table(os, t);
  return os.str();
}

// Grid over the original-scale domain, endpoints included.
inline std::vector<double> original_grid(const DataTransform& tr, std::size_t n) {
  std::vector<double> x(n);
  for (std::size_t j = 0; j < n; ++j)
    x[j] = j + 1 == n ? tr.hi : tr.lo + tr.width() * static_cast<double>(j) / static_cast<double>(n - 1);
  return x;
}

inline int cmd_fit(const RunConfig& c, const std::string& data, std::ostream& out) {
  const auto ds = read_samples(data, c.domain);
  const auto tree = PartitionTree::build(c.depth, {0.0, 1.0});
  const auto counts = bin_data(tree, ds.unit_values());
  FitOptions fo;
  fo.quadrature = c.quadrature;
  fo.threads = c.threads;
  FitArtifact a{HaptFit::fit(tree, counts, c.tau_config(), c.nu_config(), fo), ds.ids, ds.transform, c.quadrature};
  const auto path = out_path(c, "fit.json");
  save_artifact(path.string(), a);
  // Densities on the original scale carry the Jacobian of the transform.
  const double log_ml = a.fit.log_ml() - static_cast<double>(counts.total_size()) * std::log(ds.transform.width());
  out << "log_ml " << format_double(log_ml) << "\n"
      << "samples " << ds.ids.size() << "\n"
      << "fit " << path.string() << "\n";
  return 0;
}

inline FitArtifact load_fit(const RunConfig& c, const std::optional<std::string>& fit_path) {
  const auto p = fit_path ? fs::path(*fit_path) : fs::path(c.output_dir) / "fit.json";
  if (!fs::exists(p)) throw IoError("missing fit artifact '" + p.string() + "'; run `hapt fit` first");
  return load_artifact(p.string());
}

inline int cmd_density(const RunConfig& c, const std::optional<std::string>& fit_path, bool per_sample,
                       std::ostream& out) {
  const auto a = load_fit(c, fit_path);
  const auto xs = original_grid(a.transform, c.grid);
  Table t;
  t.columns = {"x", "mean"};
  if (per_sample)
    for (const auto& id : a.sample_ids) t.columns.push_back("sample:" + id);
  t.rows.assign(xs.size(), std::vector<double>(t.columns.size()));
  parallel_for(xs.size(), c.threads, [&](std::size_t j) {
    const double y = a.transform.to_unit(xs[j]);
    auto& r = t.rows[j];
    r[0] = xs[j];
    r[1] = a.transform.density_to_original(a.fit.mean_density(y));
    if (per_sample)
      for (std::size_t i = 0; i < a.sample_ids.size(); ++i)
        r[2 + i] = a.transform.density_to_original(a.fit.sample_density(i, y));
  });
  const auto path = out_path(c, "density.csv");
  write_file(path.string(), table_text(t));
  out << "density " << path.string() << "\n";
  return 0;
}

inline int cmd_dispersion(const RunConfig& c, const std::optional<std::string>& fit_path, std::ostream& out) {
  const auto a = load_fit(c, fit_path);
  const auto xs = original_grid(a.transform, c.grid);
  const double w = a.transform.width();
  Table t;
  t.columns = {"x", "mean_density", "variance", "cv"};
  t.rows.assign(xs.size(), std::vector<double>(4));
  DispersionStats stats;
  parallel_for(xs.size(), c.threads, [&](std::size_t j) {
    const double y = a.transform.to_unit(xs[j]);
    const double mean = a.fit.mean_density(y);
    if (!(mean >= 1e-300)) throw Error("mean density underflow at x=" + format_double(xs[j]));
    const double var = variance_function(a.fit, y, &stats);
    t.rows[j] = {xs[j], mean / w, var / (w * w), var == 0.0 ? 0.0 : std::sqrt(var) / mean};
  });
  const auto path = out_path(c, "dispersion.csv");
  write_file(path.string(), table_text(t));
  out << "dispersion " << path.string() << "\n"
      << "clamped " << stats.clamped.load() << "\n";
  return 0;
}

inline int cmd_cluster(const RunConfig& c, const std::string& data, bool save_draws, std::ostream& out) {
  const auto ds = read_samples(data, c.domain);
  const auto tree = PartitionTree::build(c.depth, {0.0, 1.0});
  const auto counts = bin_data(tree, ds.unit_values());
  FitOptions fo;
  fo.quadrature = c.quadrature;
  ClusterModel model(tree, counts, c.tau_config(), c.nu_config(), fo);
  DpmOptions o;
  o.alpha = c.dpm.alpha;
  o.burnin = c.dpm.burnin;
  o.draws = c.dpm.draws;
  o.seed = c.seed;
  o.threads = c.threads;
  const auto s = run_chain(model, o);

  Table co;
  co.columns = ds.ids;
  co.rows = s.coclustering;
  const auto co_path = out_path(c, "coclustering.csv");
  write_file(co_path.string(), table_text(co));

  Table hist;
  hist.columns = {"n_clusters", "count", "probability"};
  for (const auto& [k, n] : s.n_clusters_hist)
    hist.rows.push_back({static_cast<double>(k), static_cast<double>(n),
                         static_cast<double>(n) / static_cast<double>(o.draws)});
  write_file(out_path(c, "n_clusters.csv").string(), table_text(hist));

  std::ostringstream modal;
  modal << "sample_id,cluster\n";
  for (std::size_t i = 0; i < s.modal.size(); ++i) modal << ds.ids[i] << ',' << s.modal[i] << '\n';
  write_file(out_path(c, "modal.csv").string(), modal.str());

  if (save_draws) {
    Table d;
    d.columns = ds.ids;
    for (const auto& a : s.draws) d.rows.emplace_back(a.begin(), a.end());
    write_file(out_path(c, "draws.csv").string(), table_text(d));
  }
  out << "coclustering " << co_path.string() << "\n";
  if (!s.modal.empty())
    out << "modal_clusters " << clusters_of(s.modal).size() << "\n"
        << "modal_log_score " << format_double(s.modal_score) << "\n";
  return 0;
}

inline int cmd_simulate(const RunConfig& c, std::ostream& out) {
  Scenario sc;
  sc.id = parse_scenario(c.scenario);
  sc.dirichlet_total = c.dirichlet_total;
  sc.seed = c.seed;
  const auto sims = generate(sc, c.n_samples, c.n_obs);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < sims.size(); ++i) ids.push_back("s" + std::to_string(i + 1));

  std::ostringstream samples;
  write_samples(samples, ids, values_of(sims));
  const auto spath = out_path(c, "samples.csv");
  write_file(spath.string(), samples.str());

  Table truth;
  truth.columns = {"x"};
  for (const auto& id : ids) truth.columns.push_back("sample:" + id);
  const auto xs = original_grid({0.0, 1.0}, c.grid);
  for (double x : xs) {
    std::vector<double> r{x};
    for (const auto& s : sims) r.push_back(s.truth.density(x));
    truth.rows.push_back(std::move(r));
  }
  write_file(out_path(c, "truth.csv").string(), table_text(truth));

  if (sims.front().cluster >= 0) {
    std::ostringstream cl;
    cl << "sample_id,cluster\n";
    for (std::size_t i = 0; i < sims.size(); ++i) cl << ids[i] << ',' << sims[i].cluster << '\n';
    write_file(out_path(c, "clusters.csv").string(), cl.str());
  }
  out << "samples " << spath.string() << "\n";
  return 0;
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App cli{"Hierarchical adaptive Polya tree density estimation, dispersion and clustering", "hapt"};
  cli.require_subcommand(1);
  cli.set_version_flag("--version", "hapt 1.0.0");
  Overrides ov;
  std::string data;
  std::optional<std::string> fit_path;
  bool per_sample = false, save_draws = false, reference = false;

  auto common = [&](CLI::App* s) {
    s->add_option("--config", ov.config_path, "JSON config file (see `hapt config --reference`)");
    s->add_option("--out-dir", ov.out_dir, "output directory [.]");
    s->add_option("--threads", ov.threads, "worker thread cap [1]")->check(CLI::PositiveNumber);
  };
  auto model_flags = [&](CLI::App* s) {
    s->add_option("--depth", ov.depth, "partition depth [10]");
    s->add_option("--domain", ov.domain, "'auto' or 'lo,hi' [auto]");
    s->add_option("--tolerance", ov.tolerance, "relative quadrature tolerance per node [1e-8]");
  };

  auto* fit = cli.add_subcommand("fit", "fit the model and write fit.json; prints the log marginal likelihood");
  fit->add_option("--data", data, "CSV with header sample_id,value")->required();
  common(fit);
  model_flags(fit);

  auto* dens = cli.add_subcommand("density", "write density.csv (x, mean[, sample:<id>...]) from a saved fit");
  dens->add_option("--fit", fit_path, "fit artifact [<out-dir>/fit.json]");
  dens->add_option("--grid", ov.grid, "grid points, endpoints included [1024]");
  dens->add_flag("--samples", per_sample, "add one column per sample");
  common(dens);

  auto* disp = cli.add_subcommand("dispersion", "write dispersion.csv (x, mean_density, variance, cv) from a saved fit");
  disp->add_option("--fit", fit_path, "fit artifact [<out-dir>/fit.json]");
  disp->add_option("--grid", ov.grid, "grid points, endpoints included [1024]");
  common(disp);

  auto* clus = cli.add_subcommand("cluster", "cluster samples; writes coclustering.csv, n_clusters.csv, modal.csv");
  clus->add_option("--data", data, "CSV with header sample_id,value")->required();
  clus->add_option("--alpha", ov.alpha, "Dirichlet-process concentration [1]");
  clus->add_option("--burnin", ov.burnin, "burn-in sweeps [500]");
  clus->add_option("--draws", ov.draws, "retained sweeps [1000]");
  clus->add_option("--seed", ov.seed, "random seed [1]");
  clus->add_flag("--save-draws", save_draws, "also write draws.csv");
  common(clus);
  model_flags(clus);

  auto* sim = cli.add_subcommand("simulate", "write samples.csv and truth.csv for a simulation scenario");
  sim->add_option("--scenario", ov.scenario, "s1, s2, s3, disp, clust or clust_het [s1]");
  sim->add_option("--samples", ov.n_samples, "number of samples [10]");
  sim->add_option("--obs", ov.n_obs, "observations per sample [100]");
  sim->add_option("--seed", ov.seed, "random seed [1]");
  sim->add_option("--dirichlet-total", ov.dirichlet_total, "Dirichlet total for s1-s3 [10]");
  sim->add_option("--grid", ov.grid, "grid points of truth.csv [1024]");
  common(sim);

  auto* cfg = cli.add_subcommand("config", "print the resolved config as JSON, or the field reference");
  cfg->add_flag("--reference", reference, "print the markdown reference of all fields and defaults");
  cfg->add_option("--config", ov.config_path, "JSON config file to resolve");

  try {
    cli.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return cli.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    err << "error: usage: " << msg << "\n";
    return 2;
  }

  try {
    const RunConfig c = ov.resolve();
    if (*fit) return cmd_fit(c, data, out);
    if (*dens) return cmd_density(c, fit_path, per_sample, out);
    if (*disp) return cmd_dispersion(c, fit_path, out);
    if (*clus) return cmd_cluster(c, data, save_draws, out);
    if (*sim) return cmd_simulate(c, out);
    if (reference)
      out << config_reference();
    else
      out << to_json(c).dump(2) << "\n";
    return 0;
  } catch (const Error& e) {
    std::string msg = e.what();
    for (char& ch : msg)
      if (ch == '\n') ch = ' ';
    err << "error: " << e.code() << ": " << msg << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace hapt::app
