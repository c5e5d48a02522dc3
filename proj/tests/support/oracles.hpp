#pragma once

// Reference computations for the tests. Each one is deliberately naive and
// shares no numerical code with the library beyond the data types:
//   * exhaustive enumeration of joint state assignments on small trees,
//   * tensor-grid and unfactorized adaptive integration of one node,
//   * a Monte Carlo sampler of the full posterior on small trees,
//   * exact partition posteriors for the clustering sampler.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <queue>
#include <random>
#include <utility>
#include <vector>

#include "hapt/dpm.hpp"
#include "hapt/partition.hpp"
#include "hapt/sis_prior.hpp"
#include "hapt/tree_hmm.hpp"

namespace oracle {

inline double lbeta(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

inline double lse(double a, double b) {
  if (a == -INFINITY) return b;
  if (b == -INFINITY) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

// Transition probability straight from the exponential-kernel formula.
inline double transition(const hapt::SisConfig& c, std::size_t i, std::size_t j) {
  if (c.transition_override) return (*c.transition_override)(i, j);
  const std::size_t n = c.state_count();
  if (j < i) return 0.0;
  double norm = 0.0;
  for (std::size_t m = i; m < n; ++m) norm += std::exp(c.beta * static_cast<double>(m - i));
  return std::exp(c.beta * static_cast<double>(j - i)) / norm;
}

// log sum over every joint state assignment of internal nodes of
// root(s_root) prod T(s_parent, s_child) prod Z(A | s_A), using the node
// evidence stored in the fit. Comparable to fit.log_ml_tree().
inline double enumerate_log_ml_tree(const hapt::HaptFit& fit) {
  const auto& tree = fit.tree();
  const auto& tau = fit.tau_config();
  const auto& nu = fit.nu_config();
  const std::size_t It = tau.state_count(), In = nu.state_count(), J = It * In;
  const std::size_t m = tree.internal_count();
  std::vector<std::size_t> s(m, 0);
  double total = -INFINITY;
  while (true) {
    double lw = std::log(tau.root_dist[s[0] / In]) + std::log(nu.root_dist[s[0] % In]);
    for (std::size_t h = 0; h < m && lw > -INFINITY; ++h) {
      const auto id = hapt::NodeId::from_heap(h);
      lw += fit.evidence(id, s[h]).log_evidence;
      if (h > 0) {
        const std::size_t p = s[id.parent().heap()];
        lw += std::log(transition(tau, p / In, s[h] / In)) + std::log(transition(nu, p % In, s[h] % In));
      }
    }
    total = lse(total, lw);
    std::size_t d = 0;
    while (d < m && ++s[d] == J) s[d++] = 0;
    if (d == m) break;
  }
  return total;
}

// One node with finite (interval or point-mass) states on both chains.
struct NodeProblem {
  double theta0 = 0.5;
  std::vector<std::pair<std::int64_t, std::int64_t>> counts;  // (left, right) per sample
  hapt::ConcentrationSupport tau{1.0, 4.0};
  hapt::ConcentrationSupport nu{1.0, 4.0};
};

// log of the joint integrand in (theta, log tau, log nu), including the
// log-uniform priors expressed in the log variables.
inline double log_joint(const NodeProblem& p, double lt, double l1m, double log_tau, double log_nu) {
  const double theta = std::exp(lt), one_m = std::exp(l1m);
  const double tau = std::exp(log_tau), nu = std::exp(log_nu);
  const double a = p.theta0 * nu, b = (1.0 - p.theta0) * nu;
  double v = (a - 1.0) * lt + (b - 1.0) * l1m - lbeta(a, b);
  for (const auto& [l, r] : p.counts)
    v += lbeta(theta * tau + static_cast<double>(l), one_m * tau + static_cast<double>(r)) - lbeta(theta * tau, one_m * tau);
  if (p.tau.lo != p.tau.hi) v -= std::log(std::log(p.tau.hi) - std::log(p.tau.lo));
  if (p.nu.lo != p.nu.hi) v -= std::log(std::log(p.nu.hi) - std::log(p.nu.lo));
  return v;
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int n) {
  std::vector<double> x(n), w(n);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * j - 1.0) * z * p1 - (j - 1.0) * p2) / j;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

// Tanh-sinh map t -> theta = logistic(pi sinh t), in logs.
struct TsPoint {
  double log_theta, log_one_minus, log_jac;
};
inline TsPoint ts_point(double t) {
  const double z = std::numbers::pi * std::sinh(t);
  const double lt = -std::log1p(std::exp(-std::abs(z))) - (z < 0 ? -z : 0.0);
  const double l1m = -std::log1p(std::exp(-std::abs(z))) - (z > 0 ? z : 0.0);
  return {lt, l1m, lt + l1m + std::log(std::numbers::pi * std::cosh(t))};
}

struct GridResult {
  double log_z;
  double m1;
};

// Tensor product rule with n points per axis: tanh-sinh in theta,
// Gauss-Legendre in log tau and log nu (a point-mass axis has one point).
inline GridResult tensor_grid(const NodeProblem& p, int n = 100, double t_max = 4.5) {
  const auto [gx, gw] = gauss_legendre(n);
  auto axis = [&](const hapt::ConcentrationSupport& s) {
    std::vector<std::pair<double, double>> pts;  // (log value, log weight)
    if (s.lo == s.hi) {
      pts.emplace_back(std::log(s.lo), 0.0);
      return pts;
    }
    const double a = std::log(s.lo), b = std::log(s.hi);
    for (int i = 0; i < n; ++i) pts.emplace_back(0.5 * (a + b) + 0.5 * (b - a) * gx[i], std::log(0.5 * (b - a) * gw[i]));
    return pts;
  };
  const auto tau = axis(p.tau), nu = axis(p.nu);
  const double h = 2.0 * t_max / (n - 1);
  double lz = -INFINITY, lm = -INFINITY;
  for (int i = 0; i < n; ++i) {
    const auto q = ts_point(-t_max + h * i);
    for (const auto& [lt, wt] : tau)
      for (const auto& [ln, wn] : nu) {
        const double v = log_joint(p, q.log_theta, q.log_one_minus, lt, ln) + wt + wn + q.log_jac + std::log(h);
        lz = lse(lz, v);
        lm = lse(lm, v + q.log_theta);
      }
  }
  return {lz, std::exp(lm - lz)};
}

// Adaptive Gauss-Kronrod 7/15 on [a, b] of exp(f(x) - shift).
inline double gk15_panel(const std::function<double(double)>& f, double a, double b, double shift, double* err) {
  static const double xk[8] = {0.991455371120812639, 0.949107912342758525, 0.864864423359769073,
                               0.741531185599394440, 0.586087235467691130, 0.405845151377397167,
                               0.207784955007898468, 0.0};
  static const double wk[8] = {0.022935322010529225, 0.063092092629978553, 0.104790010322250184,
                               0.140653259715525919, 0.169004726639267903, 0.190350578064785410,
                               0.204432940075298892, 0.209482141084727828};
  static const double wg[4] = {0.129484966168869693, 0.279705391489276668, 0.381830050505118945,
                               0.417959183673469388};
  const double c = 0.5 * (a + b), hl = 0.5 * (b - a);
  const double fc = std::exp(f(c) - shift);
  double k = wk[7] * fc, g = wg[3] * fc;
  for (int j = 0; j < 7; ++j) {
    const double v = std::exp(f(c - hl * xk[j]) - shift) + std::exp(f(c + hl * xk[j]) - shift);
    k += wk[j] * v;
    if (j % 2 == 1) g += wg[j / 2] * v;
  }
  *err = std::abs(k - g) * hl;
  return k * hl;
}

// Globally adaptive Gauss-Kronrod: bisect the worst panel until the summed
// error estimate is below tol times the integral.
inline double gk15(const std::function<double(double)>& f, double a, double b, double shift, double tol,
                   std::size_t max_panels = 4000) {
  struct Panel {
    double a, b, value, err;
    bool operator<(const Panel& o) const { return err < o.err; }
  };
  std::priority_queue<Panel> heap;
  double total = 0.0, total_err = 0.0;
  auto add = [&](double lo, double hi) {
    Panel p{lo, hi, 0.0, 0.0};
    p.value = gk15_panel(f, lo, hi, shift, &p.err);
    total += p.value;
    total_err += p.err;
    heap.push(p);
  };
  add(a, b);
  while (total_err > tol * std::abs(total) && heap.size() < max_panels) {
    const Panel w = heap.top();
    heap.pop();
    total -= w.value;
    total_err -= w.err;
    const double c = 0.5 * (w.a + w.b);
    add(w.a, c);
    add(c, w.b);
  }
  return total;
}

// log of int over (log tau, log nu) at fixed theta, nested without using
// the product structure.
inline double inner_unfactorized(const NodeProblem& p, double lt, double l1m, double tol) {
  const bool tp = p.tau.lo == p.tau.hi, np = p.nu.lo == p.nu.hi;
  const double ta = std::log(p.tau.lo), tb = std::log(p.tau.hi);
  const double na = std::log(p.nu.lo), nb = std::log(p.nu.hi);
  // Shifts come from a coarse scan so that exp never overflows.
  auto scan_max = [](const std::function<double(double)>& f, double a, double b) {
    double m = -INFINITY;
    for (int k = 0; k <= 16; ++k) m = std::max(m, f(a + (b - a) * k / 16.0));
    return m;
  };
  auto over_nu = [&](double log_tau) {
    if (np) return log_joint(p, lt, l1m, log_tau, na);
    auto f = [&](double ln) { return log_joint(p, lt, l1m, log_tau, ln); };
    const double shift = scan_max(f, na, nb);
    return std::log(gk15(f, na, nb, shift, tol)) + shift;
  };
  if (tp) return over_nu(ta);
  const double shift = scan_max(over_nu, ta, tb);
  return std::log(gk15(over_nu, ta, tb, shift, tol)) + shift;
}

// Unfactorized adaptive quadrature: tanh-sinh over theta with step halving
// until successive levels agree to `tol`, nested adaptive rules inside.
inline double unfactorized_adaptive(const NodeProblem& p, double tol = 1e-10, double t_max = 6.0) {
  auto term = [&](double t) {
    const auto q = ts_point(t);
    return inner_unfactorized(p, q.log_theta, q.log_one_minus, tol * 0.1) + q.log_jac;
  };
  double h = 0.5;
  double sum = -INFINITY;  // log of the sum of terms at the current level
  for (double t = -t_max; t <= t_max + 1e-12; t += h) sum = lse(sum, term(t));
  double prev = sum + std::log(h);
  for (int level = 0; level < 12; ++level) {
    h *= 0.5;
    for (double t = -t_max + h; t < t_max; t += 2 * h) sum = lse(sum, term(t));
    const double cur = sum + std::log(h);
    if (std::abs(std::expm1(cur - prev)) < tol && level >= 2) return cur;
    prev = cur;
  }
  return prev;
}

// Exact posterior over partitions of a few samples: EPPF times the product
// of cluster marginal likelihoods, for every set partition.
inline std::vector<std::pair<std::vector<int>, double>> partition_posterior(hapt::ClusterModel& model, double alpha) {
  const std::size_t k = model.samples();
  std::vector<std::vector<int>> parts;
  std::vector<int> a(k, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int used) {
    if (i == k) {
      parts.push_back(a);
      return;
    }
    for (int c = 0; c <= used; ++c) {
      a[i] = c;
      rec(i + 1, std::max(used, c + 1));
    }
  };
  rec(0, 0);
  std::vector<std::pair<std::vector<int>, double>> out;
  double norm = -INFINITY;
  for (const auto& part : parts) {
    const auto cl = hapt::clusters_of(part);
    double lw = static_cast<double>(cl.size()) * std::log(alpha) + std::lgamma(alpha) -
                std::lgamma(alpha + static_cast<double>(k));
    for (const auto& c : cl) lw += std::lgamma(static_cast<double>(c.size())) + model.cluster_log_ml(c);
    out.emplace_back(part, lw);
    norm = lse(norm, lw);
  }
  for (auto& [part, lw] : out) lw = std::exp(lw - norm);
  return out;
}

// Monte Carlo sampler of the exact posterior on a small tree. Node
// posteriors are discretised on fine (logit theta) x (log tau) cells with
// nu integrated out by Gauss-Legendre; state assignments are enumerated.
class PosteriorSampler {
 public:
  PosteriorSampler(const hapt::PartitionTree& tree, const hapt::CountTable& counts, const hapt::SisConfig& tau,
                   const hapt::SisConfig& nu, int theta_cells = 2000, int tau_cells = 64, int nu_points = 32)
      : tree_(tree), tau_(tau), nu_(nu), It_(tau.state_count()), In_(nu.state_count()) {
    const std::size_t m = tree.internal_count();
    const std::size_t J = It_ * In_;
    nodes_.resize(m);
    const auto [gx, gw] = gauss_legendre(nu_points);
    for (std::size_t h = 0; h < m; ++h) {
      const auto id = hapt::NodeId::from_heap(h);
      NodeProblem p;
      p.theta0 = tree.theta0(id);
      for (std::size_t i = 0; i < counts.samples(); ++i) p.counts.emplace_back(counts.left(i, id), counts.right(i, id));
      nodes_[h].resize(J);
      for (std::size_t s = 0; s < J; ++s) build_cells(nodes_[h][s], p, s / In_, s % In_, theta_cells, tau_cells, gx, gw);
    }
    // Enumerate joint assignments.
    std::vector<std::size_t> s(m, 0);
    double norm = -INFINITY;
    while (true) {
      double lw = std::log(tau.root_dist[s[0] / In_]) + std::log(nu.root_dist[s[0] % In_]);
      for (std::size_t h = 0; h < m && lw > -INFINITY; ++h) {
        lw += nodes_[h][s[h]].log_z;
        if (h > 0) {
          const std::size_t par = s[hapt::NodeId::from_heap(h).parent().heap()];
          lw += std::log(transition(tau, par / In_, s[h] / In_)) + std::log(transition(nu, par % In_, s[h] % In_));
        }
      }
      assignments_.push_back(s);
      assign_lw_.push_back(lw);
      norm = lse(norm, lw);
      std::size_t d = 0;
      while (d < m && ++s[d] == J) s[d++] = 0;
      if (d == m) break;
    }
    double acc = 0.0;
    for (double& v : assign_lw_) {
      acc += std::exp(v - norm);
      v = acc;
    }
    log_ml_tree_ = norm;
  }

  double log_ml_tree() const { return log_ml_tree_; }

  struct Draw {
    std::vector<double> theta;       // per internal node
    std::vector<double> theta_star;  // new-sample split, per internal node
    std::vector<std::vector<double>> theta_i;  // [sample][node] conjugate posterior split
  };

  template <class Urng>
  Draw draw(Urng& g, std::size_t samples_to_draw = 0, const hapt::CountTable* counts = nullptr) const {
    std::uniform_real_distribution<double> U(0.0, 1.0);
    const double u = U(g) * assign_lw_.back();
    const std::size_t a = static_cast<std::size_t>(std::upper_bound(assign_lw_.begin(), assign_lw_.end(), u) -
                                                    assign_lw_.begin());
    const auto& s = assignments_[std::min(a, assignments_.size() - 1)];
    Draw d;
    const std::size_t m = nodes_.size();
    d.theta.resize(m);
    d.theta_star.resize(m);
    d.theta_i.assign(samples_to_draw, std::vector<double>(m));
    for (std::size_t h = 0; h < m; ++h) {
      const Cells& c = nodes_[h][s[h]];
      double theta, tau;
      c.sample(g, theta, tau);
      d.theta[h] = theta;
      d.theta_star[h] = std::isinf(tau) ? theta : beta(g, theta * tau, (1.0 - theta) * tau);
      for (std::size_t i = 0; i < samples_to_draw; ++i) {
        const auto id = hapt::NodeId::from_heap(h);
        if (std::isinf(tau)) {
          d.theta_i[i][h] = theta;
        } else {
          const double l = static_cast<double>(counts->left(i, id)), r = static_cast<double>(counts->right(i, id));
          d.theta_i[i][h] = beta(g, theta * tau + l, (1.0 - theta) * tau + r);
        }
      }
    }
    return d;
  }

  // Density of the path product of `split` at x (uniform leaf closure).
  double density(const std::vector<double>& split, double x) const {
    double v = 1.0 / tree_.leaf_width();
    for (const auto& st : tree_.path(x)) {
      const double t = split[st.node.heap()];
      v *= st.left ? t : 1.0 - t;
    }
    return v;
  }

 private:
  struct Cells {
    double log_z = -INFINITY;
    bool theta_fixed = false;
    bool tau_inf = false;
    double theta0 = 0.5;
    std::vector<double> theta_edges;  // logit edges
    std::vector<double> tau_edges;    // log edges (empty = point mass)
    double tau_point = 0.0;
    std::vector<double> cdf;          // over theta_cells x tau_cells

    template <class Urng>
    void sample(Urng& g, double& theta, double& tau) const {
      std::uniform_real_distribution<double> U(0.0, 1.0);
      if (cdf.empty()) {
        theta = theta0;
        tau = INFINITY;
        return;
      }
      const double u = U(g) * cdf.back();
      const std::size_t k = static_cast<std::size_t>(std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
      const std::size_t nt = tau_edges.empty() ? 1 : tau_edges.size() - 1;
      const std::size_t ti = std::min(k, cdf.size() - 1) / nt, ui = std::min(k, cdf.size() - 1) % nt;
      if (theta_fixed) {
        theta = theta0;
      } else {
        const double lu = theta_edges[ti] + U(g) * (theta_edges[ti + 1] - theta_edges[ti]);
        theta = 1.0 / (1.0 + std::exp(-lu));
      }
      if (tau_inf) tau = INFINITY;
      else if (tau_edges.empty()) tau = tau_point;
      else tau = std::exp(tau_edges[ui] + U(g) * (tau_edges[ui + 1] - tau_edges[ui]));
    }
  };

  template <class Urng>
  static double beta(Urng& g, double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    double x = ga(g), y = gb(g);
    // Tiny shapes can underflow both draws; fall back to a Bernoulli split.
    if (x + y == 0.0) return std::uniform_real_distribution<double>(0.0, 1.0)(g) < a / (a + b) ? 1.0 : 0.0;
    return x / (x + y);
  }

  void build_cells(Cells& c, const NodeProblem& p, std::size_t st, std::size_t sn, int theta_cells, int tau_cells,
                   const std::vector<double>& gx, const std::vector<double>& gw) const {
    const bool tau_inf = !tau_.finite_state(st);
    const bool nu_inf = !nu_.finite_state(sn);
    c.theta0 = p.theta0;
    c.tau_inf = tau_inf;
    c.theta_fixed = nu_inf;
    std::int64_t nl = 0, nr = 0;
    for (const auto& [l, r] : p.counts) {
      nl += l;
      nr += r;
    }
    if (tau_inf && nu_inf) {
      c.log_z = static_cast<double>(nl) * std::log(p.theta0) + static_cast<double>(nr) * std::log1p(-p.theta0);
      return;
    }
    // theta cells (logit scale), or a single fixed theta.
    std::vector<double> lt_mid, lw_theta;
    if (nu_inf) {
      lt_mid.push_back(std::log(p.theta0) - std::log1p(-p.theta0));
      lw_theta.push_back(0.0);
      c.theta_edges = {lt_mid[0], lt_mid[0]};
    } else {
      const double lo = -30.0, hi = 30.0, w = (hi - lo) / theta_cells;
      for (int i = 0; i <= theta_cells; ++i) c.theta_edges.push_back(lo + w * i);
      for (int i = 0; i < theta_cells; ++i) {
        const double u = lo + w * (i + 0.5);
        lt_mid.push_back(u);
        lw_theta.push_back(std::log(w) - std::log1p(std::exp(-u)) - std::log1p(std::exp(u)));  // w * theta (1-theta)
      }
    }
    // tau cells.
    std::vector<std::pair<double, double>> tau_pts;  // (log tau, log weight incl. prior)
    if (tau_inf) {
      tau_pts.emplace_back(INFINITY, 0.0);
    } else {
      const auto& s = tau_.supports[st];
      if (s.point_mass()) {
        tau_pts.emplace_back(std::log(s.lo), 0.0);
        c.tau_point = s.lo;
      } else {
        const double a = std::log(s.lo), b = std::log(s.hi), w = (b - a) / tau_cells;
        for (int j = 0; j <= tau_cells; ++j) c.tau_edges.push_back(a + w * j);
        for (int j = 0; j < tau_cells; ++j) tau_pts.emplace_back(a + w * (j + 0.5), std::log(w / (b - a)));
      }
    }
    // nu integral of h at each theta (or 1 when theta is fixed).
    auto log_h = [&](double u) {
      if (nu_inf) return 0.0;
      const double lt = -std::log1p(std::exp(-u)), l1m = -std::log1p(std::exp(u));
      const auto& s = nu_.supports[sn];
      auto f = [&](double ln) {
        const double nu = std::exp(ln), a = p.theta0 * nu, b = (1.0 - p.theta0) * nu;
        return (a - 1.0) * lt + (b - 1.0) * l1m - lbeta(a, b);
      };
      if (s.point_mass()) return f(std::log(s.lo));
      const double a = std::log(s.lo), b = std::log(s.hi);
      double acc = -INFINITY;
      for (std::size_t q = 0; q < gx.size(); ++q) {
        const double ln = 0.5 * (a + b) + 0.5 * (b - a) * gx[q];
        acc = lse(acc, f(ln) + std::log(0.5 * gw[q]));  // (b-a)/2 * w / (b-a): log-uniform prior
      }
      return acc;
    };
    // g at (theta, tau).
    auto log_g = [&](double u, double log_tau) {
      const double lt = -std::log1p(std::exp(-u)), l1m = -std::log1p(std::exp(u));
      if (std::isinf(log_tau))
        return static_cast<double>(nl) * lt + static_cast<double>(nr) * l1m;
      const double th = std::exp(lt), om = std::exp(l1m), tau = std::exp(log_tau);
      double v = 0.0;
      for (const auto& [l, r] : p.counts)
        v += lbeta(th * tau + static_cast<double>(l), om * tau + static_cast<double>(r)) - lbeta(th * tau, om * tau);
      return v;
    };
    std::vector<double> lw;
    lw.reserve(lt_mid.size() * tau_pts.size());
    double mx = -INFINITY;
    for (std::size_t i = 0; i < lt_mid.size(); ++i) {
      const double hval = log_h(lt_mid[i]);
      for (const auto& [ltau, wtau] : tau_pts) {
        const double v = lw_theta[i] + hval + log_g(lt_mid[i], ltau) + wtau;
        lw.push_back(v);
        mx = std::max(mx, v);
      }
    }
    double acc = 0.0;
    c.cdf.resize(lw.size());
    for (std::size_t q = 0; q < lw.size(); ++q) c.cdf[q] = (acc += std::exp(lw[q] - mx));
    c.log_z = std::log(acc) + mx;
  }

  hapt::PartitionTree tree_;
  hapt::SisConfig tau_, nu_;
  std::size_t It_, In_;
  std::vector<std::vector<Cells>> nodes_;
  std::vector<std::vector<std::size_t>> assignments_;
  std::vector<double> assign_lw_;  // cumulative weights after construction
  double log_ml_tree_ = 0.0;
};

}  // namespace oracle
