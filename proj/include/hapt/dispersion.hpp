#pragma once

// Cross-sample dispersion of a fitted model. For a new sample density q*,
//
//   E_q[Var(q*(x) | q)] = w(x)^2 (E[prod vl|vr] - E[prod m2|m2_right]),
//
// where the products run over the path of x, vl/vr are the node second
// moments of theta* and m2/m2_right those of theta, and w(x) is the leaf
// closure density. Both expectations go through the tree recursion with
// the node moment tables conditional on the joint state.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <unordered_map>
#include <vector>

#include "hapt/error.hpp"
#include "hapt/parallel.hpp"
#include "hapt/tree_hmm.hpp"

namespace hapt {

// Counts variance values that came out negative from cancellation and
// were clamped to zero.
struct DispersionStats {
  std::atomic<std::size_t> clamped{0};
};

struct VarianceTerms {
  double second_moment = 0.0;  // E[prod vl|vr] w^2
  double squared_mean = 0.0;   // E[prod m2|m2_right] w^2
};

inline VarianceTerms variance_terms(const HaptFit& fit, double x) {
  const double w = 1.0 / fit.tree().leaf_width();
  VarianceTerms t;
  t.second_moment = w * w * fit.expect_path(x, [](const NodeEvidence& e, bool left) { return left ? e.vl : e.vr; });
  t.squared_mean = w * w * fit.expect_path(x, [](const NodeEvidence& e, bool left) { return left ? e.m2 : e.m2_right(); });
  return t;
}

inline double variance_function(const HaptFit& fit, double x, DispersionStats* stats = nullptr) {
  const auto t = variance_terms(fit, x);
  const double diff = t.second_moment - t.squared_mean;
  if (diff >= 0.0) return diff;
  const double scale = std::max(t.second_moment, t.squared_mean);
  if (-diff <= 1e-12 * scale) {
    if (stats) stats->clamped.fetch_add(1, std::memory_order_relaxed);
    return 0.0;
  }
  throw Error("variance function is negative beyond round-off at x=" + std::to_string(x) + " (" + std::to_string(diff) +
              ")");
}

inline double cv_function(const HaptFit& fit, double x, DispersionStats* stats = nullptr) {
  const double mean = fit.mean_density(x);
  if (!(mean >= 1e-300)) throw Error("mean density underflow at x=" + std::to_string(x));
  const double v = variance_function(fit, x, stats);
  return v == 0.0 ? 0.0 : std::sqrt(v) / mean;
}

struct DispersionGrid {
  std::vector<double> points;
  std::vector<double> mean;
  std::vector<double> variance;
  std::vector<double> cv;
  std::size_t clamped = 0;
};

// Uniform grid over the closed domain, endpoints included. All quantities
// are constant within a leaf, so each leaf's path recursion runs once.
inline DispersionGrid dispersion_grid(const HaptFit& fit, std::size_t n_points, unsigned threads = 1) {
  if (n_points < 2) throw InvalidArgument("dispersion grid needs at least 2 points");
  const auto dom = fit.tree().domain();
  DispersionGrid g;
  g.points.resize(n_points);
  for (std::size_t j = 0; j < n_points; ++j)
    g.points[j] = j + 1 == n_points ? dom.hi : dom.lo + dom.width() * static_cast<double>(j) / static_cast<double>(n_points - 1);

  // Distinct leaves in order of first appearance; one representative each.
  std::vector<std::size_t> leaf_of(n_points);
  std::vector<double> rep;
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t j = 0; j < n_points; ++j) {
    const auto h = fit.tree().leaf_of(g.points[j]).heap();
    const auto [it, inserted] = slot.try_emplace(h, rep.size());
    if (inserted) rep.push_back(g.points[j]);
    leaf_of[j] = it->second;
  }
  DispersionStats stats;
  std::vector<double> mean(rep.size()), var(rep.size()), cv(rep.size());
  parallel_for(rep.size(), threads, [&](std::size_t r) {
    mean[r] = fit.mean_density(rep[r]);
    var[r] = variance_function(fit, rep[r], &stats);
    if (!(mean[r] >= 1e-300)) throw Error("mean density underflow at x=" + std::to_string(rep[r]));
    cv[r] = var[r] == 0.0 ? 0.0 : std::sqrt(var[r]) / mean[r];
  });
  g.mean.resize(n_points);
  g.variance.resize(n_points);
  g.cv.resize(n_points);
  for (std::size_t j = 0; j < n_points; ++j) {
    g.mean[j] = mean[leaf_of[j]];
    g.variance[j] = var[leaf_of[j]];
    g.cv[j] = cv[leaf_of[j]];
  }
  g.clamped = stats.clamped.load();
  return g;
}

}  // namespace hapt
