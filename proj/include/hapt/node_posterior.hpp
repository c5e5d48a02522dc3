#pragma once

// Local evidence of one tree node under a pair of shrinkage states.
//
// For node A with split fraction theta (common structure), sample splits
// theta_i ~ Beta(theta*tau, (1-theta)*tau) integrated out analytically, and
// theta ~ Beta(theta0*nu, (1-theta0)*nu), the evidence is
//
//   Z = int G(theta) H(theta) dtheta,
//   G(theta) = int prod_i B(theta*tau + l_i, (1-theta)*tau + r_i)
//                        / B(theta*tau, (1-theta)*tau) pi(tau | s_tau) dtau,
//   H(theta) = int Beta(theta; theta0*nu, (1-theta0)*nu) pi(nu | s_nu) dnu.
//
// The outer integral runs over u = logit(theta), which turns the endpoint
// singularities of H into exponentially decaying tails. The inner integrals
// run over log(tau) and log(nu). All state pairs of a node share one set of
// outer abscissae, and every posterior moment is accumulated in the same
// pass as Z. Complete-shrinkage states are handled in closed form.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hapt/error.hpp"
#include "hapt/partition.hpp"
#include "hapt/quadrature.hpp"
#include "hapt/sis_prior.hpp"
#include "hapt/special.hpp"

namespace hapt {

struct SplitCounts {
  std::int64_t left = 0;
  std::int64_t right = 0;
  auto operator<=>(const SplitCounts&) const = default;
};

struct NodeInput {
  double theta0 = 0.5;
  std::vector<SplitCounts> counts;  // one entry per sample
  NodeId node{};                    // for diagnostics only
};

// Posterior summaries of one node conditional on a state pair.
//   m1 = E[theta], m2 = E[theta^2],
//   vl = E[theta (theta tau + 1) / (tau + 1)],
//   vr = E[(1-theta) ((1-theta) tau + 1) / (tau + 1)],
//   p[i] = E[(theta tau + l_i) / (tau + n_i)]  (posterior mean of theta_i).
struct NodeEvidence {
  double log_evidence = 0.0;
  double m1 = 0.5;
  double m2 = 0.25;
  double vl = 0.25;
  double vr = 0.25;
  std::vector<double> p;

  // E[(1 - theta)^2]
  double m2_right() const { return 1.0 - 2.0 * m1 + m2; }
};

struct QuadratureOptions {
  double tolerance = 1e-8;
  std::size_t outer_budget = 3000;  // max panels of the theta integral
  std::size_t inner_budget = 400;   // max panels of each tau / nu integral
};

namespace detail {

struct CountGroup {
  std::int64_t left;
  std::int64_t right;
  std::int64_t mult;
  std::int64_t n() const { return left + right; }
};

// Samples with identical (left, right) counts contribute identical factors,
// so they are grouped. Zero-count samples contribute nothing to Z.
struct CanonicalCounts {
  std::vector<CountGroup> groups;
  std::vector<int> sample_group;  // -1 for zero-count samples
  std::int64_t left = 0;
  std::int64_t right = 0;
  std::int64_t n() const { return left + right; }
};

inline CanonicalCounts canonicalize(const std::vector<SplitCounts>& counts) {
  CanonicalCounts c;
  std::vector<SplitCounts> distinct;
  for (const auto& s : counts) {
    if (s.left < 0 || s.right < 0) throw InvalidArgument("node counts must be nonnegative");
    c.left += s.left;
    c.right += s.right;
    if (s.left + s.right > 0) distinct.push_back(s);
  }
  std::sort(distinct.begin(), distinct.end());
  for (const auto& s : distinct) {
    if (!c.groups.empty() && c.groups.back().left == s.left && c.groups.back().right == s.right)
      ++c.groups.back().mult;
    else
      c.groups.push_back({s.left, s.right, 1});
  }
  for (const auto& s : counts) {
    if (s.left + s.right == 0) {
      c.sample_group.push_back(-1);
      continue;
    }
    const auto it = std::lower_bound(c.groups.begin(), c.groups.end(), s, [](const CountGroup& g, const SplitCounts& v) {
      return std::pair(g.left, g.right) < std::pair(v.left, v.right);
    });
    c.sample_group.push_back(static_cast<int>(it - c.groups.begin()));
  }
  return c;
}

// Evidence with per-group (not per-sample) predictive means.
struct GroupedEvidence {
  double log_z = 0.0;
  double m1 = 0.5;
  double m2 = 0.25;
  double vl = 0.25;
  double vr = 0.25;
  std::vector<double> p;
};

// Per-abscissa cache of theta-independent integrand parts. Adaptive
// panels are dyadic refinements of a fixed interval, so the same abscissae
// recur for every outer point of a node.
class AbscissaMemo {
 public:
  explicit AbscissaMemo(std::size_t stride) : stride_(stride) {}

  // Returns the slot for t and whether it was already filled.
  std::pair<double*, bool> slot(double t) {
    std::uint64_t key;
    std::memcpy(&key, &t, sizeof key);
    const auto [it, inserted] = index_.try_emplace(key, data_.size());
    if (inserted) data_.resize(data_.size() + stride_);
    return {data_.data() + it->second, !inserted};
  }

 private:
  std::size_t stride_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
  std::vector<double> data_;
};

// Inner integral over tau at fixed theta, with the moment ratios needed by
// the outer pass: rv = E[(theta tau+1)/(tau+1)], rvr likewise for 1-theta,
// rp[g] = E[(theta tau + l_g)/(tau + n_g)], expectations under g(theta, .).
struct TauIntegral {
  double log_g = 0.0;
  double rv = 1.0;
  double rvr = 1.0;
  std::vector<double> rp;
};

class TauIntegrator {
 public:
  TauIntegrator(const ConcentrationSupport& support, const std::vector<CountGroup>& groups, const QuadratureOptions& opt)
      : support_(support), groups_(groups), opt_(opt), integ_(1, 3 + groups.size()) {
    log_lo_ = std::log(support.lo);
    log_hi_ = std::log(support.hi);
  }

  void operator()(double theta, double log_theta, double one_minus, double log_one_minus, TauIntegral& out) {
    const std::size_t W = 3 + groups_.size();
    out.rp.resize(groups_.size());
    if (support_.point_mass()) {
      scratch_.resize(W);
      out.log_g = integrand(log_lo_, theta, log_theta, one_minus, log_one_minus, scratch_.data());
      out.rv = scratch_[1];
      out.rvr = scratch_[2];
      for (std::size_t g = 0; g < groups_.size(); ++g) out.rp[g] = scratch_[3 + g];
      return;
    }
    const double log_width = std::log(log_hi_ - log_lo_);
    const std::array<double, 2> br{log_lo_, log_hi_};
    auto res = integ_.integrate(
        [&](double t, std::span<double> ls, std::span<double> fac) {
          ls[0] = integrand(t, theta, log_theta, one_minus, log_one_minus, fac.data()) - log_width;
        },
        br, {opt_.tolerance, opt_.inner_budget});
    if (!res.converged) {
      failed_ = true;
      achieved_ = std::max(achieved_, res.worst_rel_error());
    }
    out.log_g = res.log_value(0, 0);
    out.rv = res.ratio(0, 1);
    out.rvr = res.ratio(0, 2);
    for (std::size_t g = 0; g < groups_.size(); ++g) out.rp[g] = res.ratio(0, 3 + g);
  }

  bool failed() const { return failed_; }
  double achieved() const { return achieved_; }

 private:
  // Memo layout: tau, 1/(tau+1), then per group log_rising(tau, n_g) and 1/(tau+n_g).
  double integrand(double t, double theta, double log_theta, double one_minus, double log_one_minus, double* fac) {
    auto [m, hit] = memo_.slot(t);
    if (!hit) {
      m[0] = std::exp(t);
      m[1] = 1.0 / (m[0] + 1.0);
      for (std::size_t g = 0; g < groups_.size(); ++g) {
        m[2 + 2 * g] = log_rising(m[0], t, groups_[g].n());
        m[3 + 2 * g] = 1.0 / (m[0] + static_cast<double>(groups_[g].n()));
      }
    }
    const double tau = m[0];
    const double la = log_theta + t;
    const double lb = log_one_minus + t;
    const double a = theta * tau;
    const double b = one_minus * tau;
    double ls = 0.0;
    fac[0] = 1.0;
    fac[1] = (a + 1.0) * m[1];
    fac[2] = (b + 1.0) * m[1];
    for (std::size_t g = 0; g < groups_.size(); ++g) {
      const auto& grp = groups_[g];
      const double term = log_rising(a, la, grp.left) + log_rising(b, lb, grp.right) - m[2 + 2 * g];
      ls += static_cast<double>(grp.mult) * term;
      fac[3 + g] = (a + static_cast<double>(grp.left)) * m[3 + 2 * g];
    }
    return ls;
  }

  ConcentrationSupport support_;
  const std::vector<CountGroup>& groups_;
  QuadratureOptions opt_;
  quad::Integrator integ_;
  AbscissaMemo memo_{2 + 2 * groups_.size()};
  std::vector<double> scratch_;
  double log_lo_ = 0.0;
  double log_hi_ = 0.0;
  bool failed_ = false;
  double achieved_ = 0.0;
};

// log of int theta^(theta0 nu) (1-theta)^((1-theta0) nu) / B(theta0 nu, (1-theta0) nu) pi(nu) dnu,
// i.e. H(theta) times the logit Jacobian theta (1 - theta).
class NuIntegrator {
 public:
  NuIntegrator(const ConcentrationSupport& support, double theta0, const QuadratureOptions& opt)
      : support_(support), theta0_(theta0), opt_(opt), integ_(1, 1) {
    log_lo_ = std::log(support.lo);
    log_hi_ = std::log(support.hi);
  }

  double operator()(double log_theta, double log_one_minus) {
    if (support_.point_mass()) return integrand(log_lo_, log_theta, log_one_minus);
    const double log_width = std::log(log_hi_ - log_lo_);
    const std::array<double, 3> br{log_lo_, 0.5 * (log_lo_ + log_hi_), log_hi_};
    auto res = integ_.integrate(
        [&](double t, std::span<double> ls, std::span<double> fac) {
          ls[0] = integrand(t, log_theta, log_one_minus) - log_width;
          fac[0] = 1.0;
        },
        br, {opt_.tolerance, opt_.inner_budget});
    if (!res.converged) {
      failed_ = true;
      achieved_ = std::max(achieved_, res.worst_rel_error());
    }
    return res.log_value(0, 0);
  }

  bool failed() const { return failed_; }
  double achieved() const { return achieved_; }

 private:
  double integrand(double t, double log_theta, double log_one_minus) {
    auto [m, hit] = memo_.slot(t);
    if (!hit) {
      const double nu = std::exp(t);
      m[0] = theta0_ * nu;
      m[1] = (1.0 - theta0_) * nu;
      m[2] = log_beta(m[0], m[1]);
    }
    return m[0] * log_theta + m[1] * log_one_minus - m[2];
  }

  ConcentrationSupport support_;
  double theta0_;
  QuadratureOptions opt_;
  quad::Integrator integ_;
  AbscissaMemo memo_{3};
  double log_lo_ = 0.0;
  double log_hi_ = 0.0;
  bool failed_ = false;
  double achieved_ = 0.0;
};

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

[[noreturn]] inline void throw_quadrature(const NodeId& node, const std::string& what, double achieved) {
  throw QuadratureError("quadrature did not converge at node " + to_string(node) + " (" + what +
                            "), achieved relative error " + std::to_string(achieved),
                        node.level, node.index, achieved);
}

// Evaluates the requested (tau-state, nu-state) pairs.
inline std::vector<GroupedEvidence> evaluate_pairs(double theta0, const CanonicalCounts& cc, const SisConfig& tau_cfg,
                                                   const SisConfig& nu_cfg,
                                                   const std::vector<std::pair<std::size_t, std::size_t>>& pairs,
                                                   const QuadratureOptions& opt, const NodeId& node) {
  if (!(opt.tolerance > 0.0)) throw InvalidArgument("quadrature tolerance must be > 0");
  if (!(theta0 > 0.0 && theta0 < 1.0)) throw InvalidArgument("theta0 must lie in (0,1)");
  const auto& groups = cc.groups;
  const std::size_t ng = groups.size();
  const double nl = static_cast<double>(cc.left);
  const double nr = static_cast<double>(cc.right);
  std::vector<GroupedEvidence> out(pairs.size());

  // Pairs needing the nested theta integral.
  std::vector<std::size_t> nested;
  std::vector<std::size_t> tau_states;
  std::vector<std::size_t> nu_states;
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto [a, b] = pairs[k];
    if (a >= tau_cfg.state_count() || b >= nu_cfg.state_count()) throw InvalidArgument("state out of range");
    const bool ta = !tau_cfg.finite_state(a);
    const bool na = !nu_cfg.finite_state(b);
    GroupedEvidence& e = out[k];
    if (ta && na) {
      // theta = theta_i = theta0 exactly.
      e.log_z = nl * std::log(theta0) + nr * std::log1p(-theta0);
      e.m1 = theta0;
      e.m2 = theta0 * theta0;
      e.vl = e.m2;
      e.vr = (1.0 - theta0) * (1.0 - theta0);
      e.p.assign(ng, theta0);
    } else if (ta) {
      // theta_i = theta: Beta-binomial in theta, one integral over nu.
      const auto& s = nu_cfg.supports[b];
      const auto nu_integrand = [&](double t, double* fac) {
        const double nu = std::exp(t);
        const double a0 = theta0 * nu;
        const double b0 = (1.0 - theta0) * nu;
        const double ap = a0 + nl;
        const double bp = b0 + nr;
        const double sp = ap + bp;
        fac[0] = 1.0;
        fac[1] = ap / sp;
        fac[2] = ap * (ap + 1.0) / (sp * (sp + 1.0));
        fac[3] = bp * (bp + 1.0) / (sp * (sp + 1.0));
        return log_rising(a0, cc.left) + log_rising(b0, cc.right) - log_rising(nu, t, cc.n());
      };
      std::array<double, 4> f{};
      if (s.point_mass()) {
        e.log_z = nu_integrand(std::log(s.lo), f.data());
      } else {
        quad::Integrator integ(1, 4);
        const double lw = std::log(std::log(s.hi) - std::log(s.lo));
        const std::array<double, 2> br{std::log(s.lo), std::log(s.hi)};
        auto res = integ.integrate(
            [&](double t, std::span<double> ls, std::span<double> fac) { ls[0] = nu_integrand(t, fac.data()) - lw; }, br,
            {opt.tolerance, opt.outer_budget});
        if (!res.converged) throw_quadrature(node, "nu integral", res.worst_rel_error());
        e.log_z = res.log_value(0, 0);
        for (std::size_t j = 1; j < 4; ++j) f[j] = res.ratio(0, j);
      }
      e.m1 = f[1];
      e.m2 = f[2];
      e.vl = e.m2;
      e.vr = f[3];
      e.p.assign(ng, e.m1);
    } else if (na) {
      // theta = theta0: one integral over tau.
      TauIntegrator ti(tau_cfg.supports[a], groups, opt);
      TauIntegral r;
      ti(theta0, std::log(theta0), 1.0 - theta0, std::log1p(-theta0), r);
      if (ti.failed()) throw_quadrature(node, "tau integral", ti.achieved());
      e.log_z = r.log_g;
      e.m1 = theta0;
      e.m2 = theta0 * theta0;
      e.vl = theta0 * r.rv;
      e.vr = (1.0 - theta0) * r.rvr;
      e.p = r.rp;
    } else {
      nested.push_back(k);
      if (std::find(tau_states.begin(), tau_states.end(), a) == tau_states.end()) tau_states.push_back(a);
      if (std::find(nu_states.begin(), nu_states.end(), b) == nu_states.end()) nu_states.push_back(b);
    }
  }
  if (nested.empty()) return out;

  std::vector<TauIntegrator> tau_int;
  tau_int.reserve(tau_states.size());
  for (std::size_t a : tau_states) tau_int.emplace_back(tau_cfg.supports[a], groups, opt);
  std::vector<NuIntegrator> nu_int;
  nu_int.reserve(nu_states.size());
  for (std::size_t b : nu_states) nu_int.emplace_back(nu_cfg.supports[b], theta0, opt);

  std::vector<std::size_t> pair_tau(nested.size());
  std::vector<std::size_t> pair_nu(nested.size());
  for (std::size_t q = 0; q < nested.size(); ++q) {
    const auto [a, b] = pairs[nested[q]];
    pair_tau[q] = static_cast<std::size_t>(std::find(tau_states.begin(), tau_states.end(), a) - tau_states.begin());
    pair_nu[q] = static_cast<std::size_t>(std::find(nu_states.begin(), nu_states.end(), b) - nu_states.begin());
  }

  // Outer variable. The centre of the theta range is integrated in
  // u = logit(theta). Beyond [u_l, u_r] the integrand behaves like
  // theta^(theta0 nu + m) (resp. (1-theta)^(...)), exponential in u, so the
  // tails are mapped through s = exp(a (u - u_l)) in (0, 1], i.e. the power
  // transform theta ~ s^(1/a), which turns them into bounded, smooth
  // integrands over a unit interval. The change of variables is exact.
  double nu_min = std::numeric_limits<double>::infinity();
  for (std::size_t b : nu_states) nu_min = std::min(nu_min, nu_cfg.supports[b].lo);
  const double a_min = theta0 * nu_min;
  const double b_min = (1.0 - theta0) * nu_min;

  const double n = nl + nr;
  const double phat = (nl + theta0) / (n + 1.0);
  const double u0 = logit(phat);
  const double uc = logit(theta0);
  const double sigma = 1.0 / std::sqrt((n + 1.0) * phat * (1.0 - phat));
  const double margin = std::max(6.0 * sigma, 3.0);
  const double u_l = std::min(u0, uc) - margin;
  const double u_r = std::max(u0, uc) + margin;
  const double span_c = u_r - u_l;

  // x in (0,1): left tail; [1, 1+span_c]: centre; (1+span_c, 2+span_c): right tail.
  const double x_end = 2.0 + span_c;
  std::vector<double> br{0.0, 1.0, 1.0 + span_c, x_end};
  for (double step = 0.5 * sigma; step < margin; step *= 3.0) {
    br.push_back(1.0 + (u0 - step - u_l));
    br.push_back(1.0 + (u0 + step - u_l));
  }
  br.push_back(1.0 + (u0 - u_l));
  br.push_back(1.0 + (uc - u_l));
  br.erase(std::remove_if(br.begin(), br.end(), [&](double v) { return !(v >= 0.0 && v <= x_end); }), br.end());
  std::sort(br.begin(), br.end());
  br.erase(std::unique(br.begin(), br.end(), [&](double x, double y) { return y - x < 1e-3 * sigma; }), br.end());
  if (br.back() != x_end) br.back() = x_end;

  const std::size_t W = 5 + ng;
  quad::Integrator outer(nested.size(), W);
  std::vector<TauIntegral> tau_vals(tau_states.size());
  std::vector<double> nu_vals(nu_states.size());
  auto integrand = [&](double x, std::span<double> ls, std::span<double> fac) {
    double u = 0.0;
    double log_jac = 0.0;
    if (x < 1.0) {
      u = u_l + std::log(x) / a_min;
      log_jac = -std::log(a_min * x);
    } else if (x <= 1.0 + span_c) {
      u = u_l + (x - 1.0);
    } else {
      const double s = x_end - x;
      u = u_r - std::log(s) / b_min;
      log_jac = -std::log(b_min * s);
    }
    const double log_theta = -softplus(-u);
    const double log_one_minus = -softplus(u);
    const double theta = std::exp(log_theta);
    const double one_minus = std::exp(log_one_minus);
    for (std::size_t j = 0; j < tau_states.size(); ++j) tau_int[j](theta, log_theta, one_minus, log_one_minus, tau_vals[j]);
    for (std::size_t j = 0; j < nu_states.size(); ++j) nu_vals[j] = nu_int[j](log_theta, log_one_minus);
    for (std::size_t q = 0; q < nested.size(); ++q) {
      const TauIntegral& t = tau_vals[pair_tau[q]];
      ls[q] = t.log_g + nu_vals[pair_nu[q]] + log_jac;
      double* f = fac.data() + q * W;
      f[0] = 1.0;
      f[1] = theta;
      f[2] = theta * theta;
      f[3] = theta * t.rv;
      f[4] = one_minus * t.rvr;
      for (std::size_t g = 0; g < ng; ++g) f[5 + g] = t.rp[g];
    }
  };
  auto res = outer.integrate(integrand, br, {opt.tolerance, opt.outer_budget});
  for (const auto& t : tau_int)
    if (t.failed()) throw_quadrature(node, "inner tau integral", t.achieved());
  for (const auto& v : nu_int)
    if (v.failed()) throw_quadrature(node, "inner nu integral", v.achieved());
  if (!res.converged) throw_quadrature(node, "theta integral", res.worst_rel_error());

  for (std::size_t q = 0; q < nested.size(); ++q) {
    GroupedEvidence& e = out[nested[q]];
    e.log_z = res.log_value(q, 0);
    if (!std::isfinite(e.log_z)) throw NonFiniteError("node evidence underflowed at node " + to_string(node));
    e.m1 = res.ratio(q, 1);
    e.m2 = res.ratio(q, 2);
    e.vl = res.ratio(q, 3);
    e.vr = res.ratio(q, 4);
    e.p.resize(ng);
    for (std::size_t g = 0; g < ng; ++g) e.p[g] = res.ratio(q, 5 + g);
  }
  return out;
}

inline NodeEvidence expand(const GroupedEvidence& g, const CanonicalCounts& cc) {
  NodeEvidence e;
  e.log_evidence = g.log_z;
  e.m1 = g.m1;
  e.m2 = g.m2;
  e.vl = g.vl;
  e.vr = g.vr;
  e.p.resize(cc.sample_group.size());
  for (std::size_t i = 0; i < cc.sample_group.size(); ++i) {
    const int gi = cc.sample_group[i];
    e.p[i] = gi < 0 ? g.m1 : g.p[static_cast<std::size_t>(gi)];
  }
  return e;
}

}  // namespace detail

// Memo of node evidence tables keyed by prior configuration, tolerance,
// theta0 and the multiset of nonzero sample counts. Values are pure
// functions of the key, so sharing across threads and fits is safe.
class EvidenceCache {
 public:
  explicit EvidenceCache(std::size_t capacity = 200000) : capacity_(capacity) {}

  std::shared_ptr<const std::vector<detail::GroupedEvidence>> find(const std::string& key) const {
    std::lock_guard lock(mu_);
    const auto it = map_.find(key);
    if (it == map_.end()) return nullptr;
    ++hits_;
    return it->second;
  }

  void insert(const std::string& key, std::shared_ptr<const std::vector<detail::GroupedEvidence>> value) {
    std::lock_guard lock(mu_);
    if (map_.size() >= capacity_) map_.clear();
    map_.emplace(key, std::move(value));
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return map_.size();
  }
  std::size_t hits() const {
    std::lock_guard lock(mu_);
    return hits_;
  }

  static std::string key(const SisConfig& tau, const SisConfig& nu, const QuadratureOptions& opt, double theta0,
                         const detail::CanonicalCounts& cc) {
    std::string k = fingerprint(tau) + "|" + fingerprint(nu) + "|";
    auto put = [&k](const void* p, std::size_t n) { k.append(static_cast<const char*>(p), n); };
    put(&opt.tolerance, sizeof(double));
    put(&theta0, sizeof(double));
    for (const auto& g : cc.groups) {
      put(&g.left, sizeof(g.left));
      put(&g.right, sizeof(g.right));
      put(&g.mult, sizeof(g.mult));
    }
    return k;
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  mutable std::size_t hits_ = 0;
  std::unordered_map<std::string, std::shared_ptr<const std::vector<detail::GroupedEvidence>>> map_;
};

// Evidence and moments for a single state pair (0-based states).
inline NodeEvidence local_evidence(const NodeInput& input, std::size_t s_tau, std::size_t s_nu, const SisConfig& tau,
                                   const SisConfig& nu, const QuadratureOptions& opt = {}) {
  if (input.counts.empty()) throw InvalidArgument("node input needs at least one sample");
  const auto cc = detail::canonicalize(input.counts);
  const auto res = detail::evaluate_pairs(input.theta0, cc, tau, nu, {{s_tau, s_nu}}, opt, input.node);
  return detail::expand(res[0], cc);
}

// Evidence for every joint state, indexed s_tau * I_nu + s_nu.
inline std::vector<NodeEvidence> local_evidence_table(const NodeInput& input, const SisConfig& tau, const SisConfig& nu,
                                                      const QuadratureOptions& opt = {}, EvidenceCache* cache = nullptr) {
  if (input.counts.empty()) throw InvalidArgument("node input needs at least one sample");
  const auto cc = detail::canonicalize(input.counts);
  std::shared_ptr<const std::vector<detail::GroupedEvidence>> grouped;
  std::string key;
  if (cache) {
    key = EvidenceCache::key(tau, nu, opt, input.theta0, cc);
    grouped = cache->find(key);
  }
  if (!grouped) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < tau.state_count(); ++a)
      for (std::size_t b = 0; b < nu.state_count(); ++b) pairs.emplace_back(a, b);
    auto v = std::make_shared<const std::vector<detail::GroupedEvidence>>(
        detail::evaluate_pairs(input.theta0, cc, tau, nu, pairs, opt, input.node));
    if (cache) cache->insert(key, v);
    grouped = std::move(v);
  }
  std::vector<NodeEvidence> out;
  out.reserve(grouped->size());
  for (const auto& g : *grouped) out.push_back(detail::expand(g, cc));
  return out;
}

}  // namespace hapt
