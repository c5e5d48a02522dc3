#pragma once

// Stochastically increasing shrinkage (SIS) prior on a concentration
// parameter: discrete shrinkage states 0..I-1 (0-based), where states
// 0..I-2 carry a conditional prior on a bounded concentration interval and
// state I-1 is complete shrinkage (concentration fixed at infinity).
// Higher states mean higher concentration. States evolve down the tree via an
// upper-triangular exponential-kernel transition matrix.

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "hapt/error.hpp"

namespace hapt {

// Support of the conditional prior for one finite state. The prior is
// uniform in log(concentration) on [lo, hi); lo == hi is a point mass.
struct ConcentrationSupport {
  double lo = 1.0;
  double hi = 4.0;
  bool point_mass() const { return lo == hi; }
  bool operator==(const ConcentrationSupport&) const = default;
};

class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  explicit TransitionMatrix(std::size_t n) : n_(n), p_(n * n, 0.0) {}

  std::size_t size() const noexcept { return n_; }
  double operator()(std::size_t from, std::size_t to) const { return p_[from * n_ + to]; }
  double& operator()(std::size_t from, std::size_t to) { return p_[from * n_ + to]; }
  bool operator==(const TransitionMatrix&) const = default;

  // Row-stochastic and upper triangular.
  void validate() const {
    if (n_ < 2) throw InvalidArgument("transition matrix needs at least two states");
    for (std::size_t i = 0; i < n_; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < n_; ++j) {
        const double v = (*this)(i, j);
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("transition entries must be finite and >= 0");
        if (j < i && v != 0.0) throw InvalidArgument("transition matrix must be upper triangular");
        s += v;
      }
      if (std::abs(s - 1.0) > 1e-12) throw InvalidArgument("transition rows must sum to 1");
    }
    if ((*this)(n_ - 1, n_ - 1) != 1.0) throw InvalidArgument("complete-shrinkage state must be absorbing");
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> p_;
};

// Gamma[i][j] proportional to exp(beta * (j - i)) for j >= i.
inline TransitionMatrix build_transition(std::size_t state_count, double beta) {
  if (state_count < 2) throw InvalidArgument("state_count must be >= 2");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be finite and >= 0");
  TransitionMatrix t(state_count);
  for (std::size_t i = 0; i < state_count; ++i) {
    // Normalise relative to the largest weight to stay finite for big beta.
    const std::size_t span = state_count - 1 - i;
    double norm = 0.0;
    for (std::size_t m = 0; m <= span; ++m) norm += std::exp(beta * (static_cast<double>(m) - static_cast<double>(span)));
    for (std::size_t m = 0; m <= span; ++m)
      t(i, i + m) = std::exp(beta * (static_cast<double>(m) - static_cast<double>(span))) / norm;
  }
  return t;
}

struct SisConfig {
  // supports.size() == state_count - 1; the last state is complete shrinkage.
  std::vector<ConcentrationSupport> supports;
  double beta = 1.0;
  std::vector<double> root_dist;
  // Replaces the exponential-kernel matrix when set (used to force chains).
  std::optional<TransitionMatrix> transition_override;

  std::size_t state_count() const noexcept { return supports.size() + 1; }
  std::size_t absorbing() const noexcept { return supports.size(); }
  bool finite_state(std::size_t s) const { return s < supports.size(); }

  TransitionMatrix transition() const {
    return transition_override ? *transition_override : build_transition(state_count(), beta);
  }

  // Cut points c_0 < c_1 < ... < c_{I-1}; finite state j covers [c_j, c_{j+1}).
  static SisConfig from_boundaries(const std::vector<double>& boundaries, double beta) {
    if (boundaries.size() < 2) throw InvalidArgument("need at least two boundaries (state_count >= 2)");
    SisConfig c;
    for (std::size_t j = 0; j + 1 < boundaries.size(); ++j) c.supports.push_back({boundaries[j], boundaries[j + 1]});
    c.beta = beta;
    c.root_dist.assign(c.state_count(), 1.0 / static_cast<double>(c.state_count()));
    c.validate();
    return c;
  }

  std::vector<double> boundaries() const {
    std::vector<double> b;
    for (const auto& s : supports) b.push_back(s.lo);
    if (!supports.empty()) b.push_back(supports.back().hi);
    return b;
  }

  void validate() const {
    if (state_count() < 2) throw InvalidArgument("state_count must be >= 2");
    for (std::size_t j = 0; j < supports.size(); ++j) {
      const auto& s = supports[j];
      if (!(s.lo > 0.0) || !std::isfinite(s.hi) || !(s.hi >= s.lo))
        throw InvalidArgument("concentration supports need 0 < lo <= hi < inf");
      if (j > 0 && !(s.lo >= supports[j - 1].hi && s.lo > supports[j - 1].lo))
        throw InvalidArgument("concentration supports must be disjoint and increasing");
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw InvalidArgument("beta must be finite and >= 0");
    if (root_dist.size() != state_count()) throw InvalidArgument("root_dist length must equal state_count");
    double sum = 0.0;
    for (double p : root_dist) {
      if (!(p >= 0.0)) throw InvalidArgument("root_dist entries must be >= 0");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw InvalidArgument("root_dist must sum to 1");
    if (transition_override) {
      if (transition_override->size() != state_count()) throw InvalidArgument("transition override has wrong size");
      transition_override->validate();
    }
  }

  bool operator==(const SisConfig&) const = default;
};

// Default prior: I states, beta = 1, boundaries 4^j starting at 1, uniform
// root distribution.
inline SisConfig default_config(std::size_t state_count = 4) {
  if (state_count < 2) throw InvalidArgument("state_count must be >= 2");
  std::vector<double> b;
  for (std::size_t j = 0; j < state_count; ++j) b.push_back(std::ldexp(1.0, static_cast<int>(2 * j)));
  return SisConfig::from_boundaries(b, 1.0);
}

// Conditional prior density pi(value | state) for a finite, non-degenerate
// state: log-uniform on [lo, hi).
inline double state_prior_density(const SisConfig& config, std::size_t state, double value) {
  if (state >= config.state_count()) throw InvalidArgument("state out of range");
  if (!config.finite_state(state))
    throw InvalidArgument("complete-shrinkage state is a point mass at infinity; use the degenerate path");
  const auto& s = config.supports[state];
  if (s.point_mass()) throw InvalidArgument("point-mass state has no density");
  if (!(value > 0.0)) throw InvalidArgument("concentration must be > 0");
  if (value < s.lo || value >= s.hi) return 0.0;
  return 1.0 / ((std::log(s.hi) - std::log(s.lo)) * value);
}

// Config that pins every node to one finite state with a point-mass
// concentration; the absorbing state is unreachable.
inline SisConfig point_mass_config(double value) {
  SisConfig c;
  c.supports = {{value, value}};
  c.beta = 0.0;
  c.root_dist = {1.0, 0.0};
  TransitionMatrix t(2);
  t(0, 0) = 1.0;
  t(1, 1) = 1.0;
  c.transition_override = t;
  c.validate();
  return c;
}

// Config whose chain starts (and so stays) in complete shrinkage.
inline SisConfig absorbed_config(const SisConfig& base = default_config()) {
  SisConfig c = base;
  c.root_dist.assign(c.state_count(), 0.0);
  c.root_dist.back() = 1.0;
  c.validate();
  return c;
}

inline std::string fingerprint(const SisConfig& c) {
  std::ostringstream os;
  os.precision(17);
  os << "I=" << c.state_count() << ";b=" << c.beta << ";s=";
  for (const auto& s : c.supports) os << s.lo << ":" << s.hi << ",";
  return os.str();
}

}  // namespace hapt
