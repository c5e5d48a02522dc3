#pragma once

// Seeded simulation scenarios on (0, 1]. Sample i of a scenario draws from
// its own Philox stream (key = seed, stream = i), so each sample can be
// regenerated in isolation and parallel generation is trivially
// reproducible. Every sample carries its closed-form true density.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hapt/error.hpp"
#include "hapt/random.hpp"
#include "hapt/special.hpp"

namespace hapt {

enum class ScenarioId { s1, s2, s3, disp, clust, clust_het };

inline const std::vector<std::string>& scenario_names() {
  static const std::vector<std::string> names{"s1", "s2", "s3", "disp", "clust", "clust_het"};
  return names;
}

inline ScenarioId parse_scenario(const std::string& name) {
  const auto& names = scenario_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("unknown scenario '" + name + "'");
  return static_cast<ScenarioId>(it - names.begin());
}

inline std::string to_string(ScenarioId id) { return scenario_names()[static_cast<std::size_t>(id)]; }

struct Scenario {
  ScenarioId id = ScenarioId::s1;
  double dirichlet_total = 10.0;  // s1-s3 only
  std::uint64_t seed = 1;
};

// Uniform(lo, hi) or a Beta(a, b) affinely mapped onto [lo, hi].
struct Component {
  bool is_beta = false;
  double a = 1.0;
  double b = 1.0;
  double lo = 0.0;
  double hi = 1.0;

  static Component uniform(double lo, double hi) { return {false, 1.0, 1.0, lo, hi}; }
  static Component beta(double a, double b, double lo = 0.0, double hi = 1.0) { return {true, a, b, lo, hi}; }

  double density(double x) const {
    if (x < lo || x > hi) return 0.0;
    const double w = hi - lo;
    if (!is_beta) return 1.0 / w;
    const double t = (x - lo) / w;
    // Exponents of exactly zero are skipped so endpoints stay finite.
    double l = -log_beta(a, b) - std::log(w);
    if (a != 1.0) l += (a - 1.0) * safe_log(t);
    if (b != 1.0) l += (b - 1.0) * safe_log(1.0 - t);
    return std::exp(l);
  }

  // Draw in (lo, hi].
  double sample(Rng& rng) const {
    if (!is_beta) return lo + (hi - lo) * rng.uniform_pos();
    double t;
    do t = rng.beta(a, b);
    while (!(t > 0.0));
    return lo + (hi - lo) * t;
  }
};

struct Mixture {
  std::vector<Component> components;
  std::vector<double> weights;

  double density(double x) const {
    double d = 0.0;
    for (std::size_t j = 0; j < components.size(); ++j) d += weights[j] * components[j].density(x);
    return d;
  }
};

struct SimSample {
  std::vector<double> values;
  std::vector<int> labels;  // mixture component of each observation
  Mixture truth;
  int cluster = -1;  // true cluster for clust / clust_het
};

namespace detail {

struct DirichletScenario {
  std::vector<Component> components;
  std::vector<double> mean_weights;
};

inline DirichletScenario dirichlet_scenario(ScenarioId id) {
  switch (id) {
    case ScenarioId::s1:
      return {{Component::uniform(0, 1), Component::beta(2, 2), Component::beta(30, 10), Component::beta(10, 30)},
              {0.1, 0.1, 0.4, 0.4}};
    case ScenarioId::s2:
      return {{Component::uniform(0, 1), Component::uniform(0.18, 0.20), Component::uniform(0.49, 0.51),
               Component::uniform(0.80, 0.82)},
              {0.1, 0.3, 0.3, 0.3}};
    case ScenarioId::s3:
      return {{Component::uniform(0, 1), Component::uniform(0.25, 0.5), Component::beta(2, 2, 0.25, 0.5),
               Component::beta(4000, 6000)},
              {0.1, 0.3, 0.4, 0.2}};
    default:
      throw InvalidArgument("not a Dirichlet-weight scenario");
  }
}

// Cluster sizes in ratio 3:2:1 by largest remainder; ties favour the
// earlier cluster.
inline std::vector<std::size_t> cluster_sizes(std::size_t n) {
  static constexpr std::array<std::size_t, 3> ratio{3, 2, 1};
  std::array<std::size_t, 3> s{}, frac{};
  for (std::size_t c = 0; c < 3; ++c) {
    s[c] = n * ratio[c] / 6;
    frac[c] = n * ratio[c] % 6;
  }
  std::size_t rem = n - (s[0] + s[1] + s[2]);
  while (rem-- > 0) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < 3; ++c)
      if (frac[c] > frac[best]) best = c;
    ++s[best];
    frac[best] = 0;
  }
  return {s.begin(), s.end()};
}

}  // namespace detail

// Mean-weight mixture of an s1-s3 scenario.
inline Mixture mean_mixture(ScenarioId id) {
  auto d = detail::dirichlet_scenario(id);
  return {d.components, d.mean_weights};
}

// Draws one sample's true mixture (cluster membership given).
inline Mixture draw_mixture(const Scenario& sc, int cluster, Rng& rng) {
  switch (sc.id) {
    case ScenarioId::s1:
    case ScenarioId::s2:
    case ScenarioId::s3: {
      if (!(sc.dirichlet_total > 0.0)) throw InvalidArgument("dirichlet_total must be > 0");
      auto d = detail::dirichlet_scenario(sc.id);
      std::vector<double> alpha(d.mean_weights.size());
      for (std::size_t j = 0; j < alpha.size(); ++j) alpha[j] = sc.dirichlet_total * d.mean_weights[j];
      return {d.components, rng.dirichlet(alpha)};
    }
    case ScenarioId::disp: {
      const double w1 = rng.beta(80, 20);
      const double v = rng.beta(1, 1);
      return {{Component::beta(2, 2), Component::beta(1, 12), Component::beta(12, 1)},
              {w1, v * (1.0 - w1), (1.0 - v) * (1.0 - w1)}};
    }
    case ScenarioId::clust: {
      static const std::array<std::array<double, 2>, 3> shapes{{{1, 5}, {3, 3}, {5, 1}}};
      const auto& sh = shapes[static_cast<std::size_t>(cluster)];
      const double wb = rng.beta(10, 10);
      return {{Component::uniform(0, 1), Component::beta(sh[0], sh[1])}, {1.0 - wb, wb}};
    }
    case ScenarioId::clust_het: {
      // Per-cluster means of v1 and v2; the middle cluster uses the
      // symmetric Beta(1000,1000) / Beta(200,200) setting.
      static const std::array<double, 3> m1{0.8, 0.5, 0.2};
      static const std::array<double, 3> m2{0.1, 0.5, 0.9};
      const auto c = static_cast<std::size_t>(cluster);
      const double v1 = rng.beta(2000.0 * m1[c], 2000.0 * (1.0 - m1[c]));
      const double v2 = rng.beta(400.0 * m2[c], 400.0 * (1.0 - m2[c]));
      const double v3 = rng.beta(1, 1);
      return {{Component::beta(1, 6), Component::beta(2, 5), Component::beta(5, 2), Component::beta(6, 1)},
              {v1 * v2, v1 * (1.0 - v2), (1.0 - v1) * v3, (1.0 - v1) * (1.0 - v3)}};
    }
  }
  throw InvalidArgument("unknown scenario");
}

inline std::vector<SimSample> generate(const Scenario& sc, std::size_t n_samples, std::size_t n_obs) {
  if (n_samples == 0 || n_obs == 0) throw InvalidArgument("n_samples and n_obs must be >= 1");
  std::vector<int> cluster(n_samples, -1);
  if (sc.id == ScenarioId::clust || sc.id == ScenarioId::clust_het) {
    const auto sizes = detail::cluster_sizes(n_samples);
    std::size_t i = 0;
    for (std::size_t c = 0; c < sizes.size(); ++c)
      for (std::size_t j = 0; j < sizes[c]; ++j) cluster[i++] = static_cast<int>(c);
  }
  std::vector<SimSample> out(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    Rng rng(sc.seed, i);
    SimSample& s = out[i];
    s.cluster = cluster[i];
    s.truth = draw_mixture(sc, cluster[i], rng);
    s.values.resize(n_obs);
    s.labels.resize(n_obs);
    for (std::size_t j = 0; j < n_obs; ++j) {
      const auto c = rng.categorical(s.truth.weights);
      s.labels[j] = static_cast<int>(c);
      s.values[j] = s.truth.components[c].sample(rng);
    }
  }
  return out;
}

inline std::vector<std::vector<double>> values_of(const std::vector<SimSample>& samples) {
  std::vector<std::vector<double>> v;
  v.reserve(samples.size());
  for (const auto& s : samples) v.push_back(s.values);
  return v;
}

// Trapezoid approximation of int |f - g| over [lo, hi] on grid_size
// equally spaced points including both endpoints.
template <class F, class G>
double l1_error(F&& truth, G&& estimate, std::size_t grid_size, double lo = 0.0, double hi = 1.0) {
  if (grid_size < 256) throw InvalidArgument("l1_error needs grid_size >= 256");
  const double h = (hi - lo) / static_cast<double>(grid_size - 1);
  double s = 0.0;
  for (std::size_t j = 0; j < grid_size; ++j) {
    const double x = j + 1 == grid_size ? hi : lo + h * static_cast<double>(j);
    const double d = std::abs(truth(x) - estimate(x));
    s += (j == 0 || j + 1 == grid_size) ? 0.5 * d : d;
  }
  return s * h;
}

}  // namespace hapt
