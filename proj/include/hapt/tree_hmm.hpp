#pragma once

// Hidden-Markov-tree recursion over the joint shrinkage state
// s = (s_tau, s_nu), indexed s_tau * I_nu + s_nu. The two chains are a
// priori independent, so the joint transition is the Kronecker product.
//
// Upward:   beta_A(s)  = log Z(A|s) + sum_{c internal child} phi_c(s)
//           phi_A(p)   = log sum_s T(p, s) exp(beta_A(s))
// Root:     log f      = log sum_s root(s) exp(beta_root(s)) + leaf terms
// Downward: post_c(s') = sum_s post_A(s) T(s, s') exp(beta_c(s') - phi_c(s))
//
// Posterior expectations of products of per-node factors reuse the stored
// messages: only the factor nodes and their ancestors are recomputed.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "hapt/error.hpp"
#include "hapt/node_posterior.hpp"
#include "hapt/parallel.hpp"
#include "hapt/partition.hpp"
#include "hapt/sis_prior.hpp"
#include "hapt/special.hpp"

namespace hapt {

struct FitOptions {
  QuadratureOptions quadrature{};
  unsigned threads = 1;
  EvidenceCache* cache = nullptr;  // optional, shared across fits
};

// Per-state multiplicative factors for one node (size = joint state count).
using FactorMap = std::map<NodeId, std::vector<double>>;

class HaptFit {
 public:
  HaptFit() = default;

  static HaptFit fit(const PartitionTree& tree, const CountTable& counts, const SisConfig& tau, const SisConfig& nu,
                     const FitOptions& opt = {}) {
    tau.validate();
    nu.validate();
    if (counts.nodes() != tree.node_count())
      throw InvalidArgument("count table has " + std::to_string(counts.nodes()) + " nodes, tree has " +
                            std::to_string(tree.node_count()));
    if (counts.samples() == 0) throw InvalidArgument("fit needs at least one sample");
    const std::size_t internal = tree.internal_count();
    std::vector<std::vector<NodeEvidence>> ev(internal);
    parallel_for(internal, opt.threads, [&](std::size_t h) {
      const NodeId id = NodeId::from_heap(h);
      NodeInput in;
      in.theta0 = tree.theta0(id);
      in.node = id;
      in.counts.resize(counts.samples());
      for (std::size_t i = 0; i < counts.samples(); ++i) in.counts[i] = {counts.left(i, id), counts.right(i, id)};
      ev[h] = local_evidence_table(in, tau, nu, opt.quadrature, opt.cache);
    });
    return assemble(tree, counts, tau, nu, std::move(ev));
  }

  // Builds a fit from precomputed node evidence (used when loading a saved
  // fit); messages and posteriors are recomputed.
  static HaptFit assemble(const PartitionTree& tree, const CountTable& counts, const SisConfig& tau, const SisConfig& nu,
                          std::vector<std::vector<NodeEvidence>> evidence) {
    HaptFit f;
    f.tree_ = tree;
    f.counts_ = counts;
    f.tau_ = tau;
    f.nu_ = nu;
    f.J_ = tau.state_count() * nu.state_count();
    if (evidence.size() != tree.internal_count()) throw InvalidArgument("evidence table has wrong node count");
    for (const auto& row : evidence) {
      if (row.size() != f.J_) throw InvalidArgument("evidence table has wrong state count");
      for (const auto& e : row)
        if (e.p.size() != counts.samples()) throw InvalidArgument("evidence table has wrong sample count");
    }
    f.ev_ = std::move(evidence);
    f.build_transition();
    f.upward();
    f.downward();
    return f;
  }

  const PartitionTree& tree() const noexcept { return tree_; }
  const CountTable& counts() const noexcept { return counts_; }
  const SisConfig& tau_config() const noexcept { return tau_; }
  const SisConfig& nu_config() const noexcept { return nu_; }
  std::size_t state_count() const noexcept { return J_; }
  std::size_t samples() const noexcept { return counts_.samples(); }

  // log marginal density of all observations.
  double log_ml() const noexcept { return log_ml_; }
  // Same without the within-leaf closure terms (probability of the counts).
  double log_ml_tree() const noexcept { return log_tree_; }

  const NodeEvidence& evidence(NodeId id, std::size_t s) const { return ev_[internal_heap(id)][s]; }
  const std::vector<NodeEvidence>& evidence_row(NodeId id) const { return ev_[internal_heap(id)]; }
  std::span<const double> state_post(NodeId id) const {
    return {post_.data() + internal_heap(id) * J_, J_};
  }
  // Posterior marginal of the tau-chain (resp. nu-chain) state at a node.
  std::vector<double> tau_post(NodeId id) const {
    std::vector<double> out(tau_.state_count(), 0.0);
    const auto p = state_post(id);
    for (std::size_t s = 0; s < J_; ++s) out[s / nu_.state_count()] += p[s];
    return out;
  }
  std::vector<double> nu_post(NodeId id) const {
    std::vector<double> out(nu_.state_count(), 0.0);
    const auto p = state_post(id);
    for (std::size_t s = 0; s < J_; ++s) out[s % nu_.state_count()] += p[s];
    return out;
  }

  // E[prod_A f_A(S(A)) | data] for nonnegative per-state factors f_A
  // (E[f*(A) | s, data] in the moment tables). Nodes absent from the map
  // contribute 1.
  double expect_product(const FactorMap& factors) const {
    std::vector<std::pair<std::size_t, const std::vector<double>*>> items;
    items.reserve(factors.size());
    for (const auto& [id, f] : factors) {
      if (!tree_.valid(id) || tree_.is_leaf(id)) throw InvalidArgument("factor node " + to_string(id) + " is not internal");
      if (f.size() != J_) throw InvalidArgument("factor for node " + to_string(id) + " has wrong state count");
      items.emplace_back(id.heap(), &f);
    }
    return exp_ratio(items);
  }

  // E[prod over the root-to-leaf path of x of fn(evidence, went_left)].
  template <class Fn>
  double expect_path(double x, Fn&& fn) const {
    const auto path = tree_.path(x);
    std::vector<std::vector<double>> fac(path.size(), std::vector<double>(J_));
    std::vector<std::pair<std::size_t, const std::vector<double>*>> items;
    items.reserve(path.size());
    for (std::size_t d = 0; d < path.size(); ++d) {
      const auto& row = ev_[path[d].node.heap()];
      for (std::size_t s = 0; s < J_; ++s) fac[d][s] = fn(row[s], path[d].left);
      items.emplace_back(path[d].node.heap(), &fac[d]);
    }
    return exp_ratio(items);
  }

  // Posterior mean of the common density q at x.
  double mean_density(double x) const {
    const double e = expect_path(x, [](const NodeEvidence& ev, bool left) { return left ? ev.m1 : 1.0 - ev.m1; });
    return e / tree_.leaf_width();
  }

  // Posterior mean of sample i's density at x.
  double sample_density(std::size_t i, double x) const {
    if (i >= samples()) throw InvalidArgument("sample index " + std::to_string(i) + " out of range");
    const double e = expect_path(x, [i](const NodeEvidence& ev, bool left) { return left ? ev.p[i] : 1.0 - ev.p[i]; });
    return e / tree_.leaf_width();
  }

  // Posterior predictive density of a new sample; equals mean_density since
  // E[q*(x) | q] = q(x).
  double predictive_density(double x) const { return mean_density(x); }

 private:
  std::size_t internal_heap(NodeId id) const {
    if (!tree_.valid(id) || tree_.is_leaf(id)) throw InvalidArgument("node " + to_string(id) + " is not internal");
    return id.heap();
  }

  void build_transition() {
    const auto gt = tau_.transition();
    const auto gn = nu_.transition();
    const std::size_t In = nu_.state_count();
    log_t_.assign(J_ * J_, kNegInf);
    log_root_.assign(J_, kNegInf);
    for (std::size_t p = 0; p < J_; ++p) {
      log_root_[p] = safe_log(tau_.root_dist[p / In] * nu_.root_dist[p % In]);
      for (std::size_t s = 0; s < J_; ++s) log_t_[p * J_ + s] = safe_log(gt(p / In, s / In) * gn(p % In, s % In));
    }
  }

  // phi(p) = log sum_s T(p, s) exp(beta(s))
  void message(const double* beta, double* phi) const {
    for (std::size_t p = 0; p < J_; ++p) {
      double m = kNegInf;
      for (std::size_t s = p; s < J_; ++s) m = std::max(m, log_t_[p * J_ + s] + beta[s]);
      if (m == kNegInf) {
        phi[p] = kNegInf;
        continue;
      }
      double acc = 0.0;
      for (std::size_t s = 0; s < J_; ++s) {
        const double v = log_t_[p * J_ + s] + beta[s];
        if (v != kNegInf) acc += std::exp(v - m);
      }
      phi[p] = m + std::log(acc);
    }
  }

  double root_value(const double* beta) const {
    double m = kNegInf;
    for (std::size_t s = 0; s < J_; ++s) m = std::max(m, log_root_[s] + beta[s]);
    if (m == kNegInf) return kNegInf;
    double acc = 0.0;
    for (std::size_t s = 0; s < J_; ++s) {
      const double v = log_root_[s] + beta[s];
      if (v != kNegInf) acc += std::exp(v - m);
    }
    return m + std::log(acc);
  }

  void upward() {
    const std::size_t internal = tree_.internal_count();
    beta_.assign(internal * J_, 0.0);
    phi_.assign(internal * J_, 0.0);
    for (std::size_t h = internal; h-- > 0;) {
      double* b = &beta_[h * J_];
      for (std::size_t s = 0; s < J_; ++s) b[s] = ev_[h][s].log_evidence;
      for (std::size_t c : {2 * h + 1, 2 * h + 2})
        if (c < internal)
          for (std::size_t s = 0; s < J_; ++s) b[s] += phi_[c * J_ + s];
      message(b, &phi_[h * J_]);
    }
    log_tree_ = root_value(&beta_[0]);
    if (!std::isfinite(log_tree_)) throw NonFiniteError("log marginal likelihood is not finite");
    // Within-leaf closure: each observation contributes 1 / leaf width.
    log_ml_ = log_tree_ - static_cast<double>(counts_.total_size()) * std::log(tree_.leaf_width());
  }

  void downward() {
    const std::size_t internal = tree_.internal_count();
    post_.assign(internal * J_, 0.0);
    for (std::size_t s = 0; s < J_; ++s) post_[s] = std::exp(log_root_[s] + beta_[s] - log_tree_);
    normalise(&post_[0]);
    for (std::size_t h = 0; h < internal; ++h) {
      const double* pa = &post_[h * J_];
      for (std::size_t c : {2 * h + 1, 2 * h + 2}) {
        if (c >= internal) continue;
        double* pc = &post_[c * J_];
        const double* bc = &beta_[c * J_];
        const double* phc = &phi_[c * J_];
        for (std::size_t p = 0; p < J_; ++p) {
          if (pa[p] == 0.0 || phc[p] == kNegInf) continue;
          for (std::size_t s = p; s < J_; ++s) {
            const double lt = log_t_[p * J_ + s];
            if (lt == kNegInf || bc[s] == kNegInf) continue;
            pc[s] += pa[p] * std::exp(lt + bc[s] - phc[p]);
          }
        }
        normalise(pc);
      }
    }
  }

  void normalise(double* p) const {
    double sum = 0.0;
    for (std::size_t s = 0; s < J_; ++s) sum += p[s];
    if (!(sum > 0.0) || !std::isfinite(sum)) throw NonFiniteError("state posterior could not be normalised");
    for (std::size_t s = 0; s < J_; ++s) p[s] /= sum;
  }

  // exp(log f' - log f) where f' is the root value with the given nodes'
  // Z multiplied by their factors.
  double exp_ratio(std::vector<std::pair<std::size_t, const std::vector<double>*>>& items) const {
    if (items.empty()) return 1.0;
    const std::size_t internal = tree_.internal_count();
    // Affected nodes: factor nodes and all their ancestors, deepest first.
    std::map<std::size_t, std::vector<double>, std::greater<>> beta_new;
    std::map<std::size_t, const std::vector<double>*> fac;
    for (const auto& [h, f] : items) {
      for (double v : *f)
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("expect_product factors must be finite and >= 0");
      fac[h] = f;
      for (std::size_t a = h;; a = (a - 1) / 2) {
        beta_new.try_emplace(a);
        if (a == 0) break;
      }
    }
    std::map<std::size_t, std::vector<double>> phi_new;
    for (auto& [h, b] : beta_new) {
      b.resize(J_);
      const auto f = fac.find(h);
      for (std::size_t s = 0; s < J_; ++s) {
        double v = ev_[h][s].log_evidence;
        if (f != fac.end()) v += safe_log((*f->second)[s]);
        for (std::size_t c : {2 * h + 1, 2 * h + 2}) {
          if (c >= internal) continue;
          const auto it = phi_new.find(c);
          v += it != phi_new.end() ? it->second[s] : phi_[c * J_ + s];
        }
        b[s] = v;
      }
      std::vector<double> ph(J_);
      message(b.data(), ph.data());
      phi_new.emplace(h, std::move(ph));
    }
    const double root = root_value(beta_new.at(0).data());
    if (root == kNegInf) return 0.0;
    return std::exp(root - log_tree_);
  }

  PartitionTree tree_;
  CountTable counts_;
  SisConfig tau_;
  SisConfig nu_;
  std::size_t J_ = 0;
  std::vector<std::vector<NodeEvidence>> ev_;  // [internal heap][state]
  std::vector<double> log_t_;
  std::vector<double> log_root_;
  std::vector<double> beta_;
  std::vector<double> phi_;
  std::vector<double> post_;
  double log_tree_ = 0.0;
  double log_ml_ = 0.0;
};

// Independent single-sample fits with complete tau-shrinkage (theta_i =
// theta), i.e. one adaptive Polya tree per sample and no pooling.
class NoPoolingFit {
 public:
  static NoPoolingFit fit(const PartitionTree& tree, const CountTable& counts, const SisConfig& nu,
                          const FitOptions& opt = {}) {
    NoPoolingFit out;
    const SisConfig tau = absorbed_config(default_config(2));
    out.fits_.resize(counts.samples());
    for (std::size_t i = 0; i < counts.samples(); ++i) {
      const std::size_t idx[] = {i};
      out.fits_[i] = HaptFit::fit(tree, counts.select(idx), tau, nu, opt);
    }
    return out;
  }

  std::size_t samples() const noexcept { return fits_.size(); }
  double sample_density(std::size_t i, double x) const { return fits_.at(i).mean_density(x); }
  const HaptFit& sample_fit(std::size_t i) const { return fits_.at(i); }

 private:
  std::vector<HaptFit> fits_;
};

}  // namespace hapt
