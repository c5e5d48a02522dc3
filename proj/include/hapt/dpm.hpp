#pragma once

// Dirichlet-process mixture of HAPT models over samples. Cluster
// assignments are Gibbs-sampled with the Polya urn: sample i joins
// existing cluster c with weight n_c f(X_i | X_c) and opens a new cluster
// with weight alpha f(X_i), where f(X_i | X_c) = f(X_c + i) / f(X_c) and
// every f is a HAPT marginal likelihood over the samples in the set.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <list>
#include <map>
#include <mutex>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "hapt/error.hpp"
#include "hapt/parallel.hpp"
#include "hapt/random.hpp"
#include "hapt/special.hpp"
#include "hapt/tree_hmm.hpp"

namespace hapt {

// Least-recently-used map from sorted sample-index sets to log marginal
// likelihoods. Thread-safe.
class SetCache {
 public:
  explicit SetCache(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 1)) {}

  bool find(const std::vector<std::size_t>& key, double& value) {
    std::lock_guard lock(mu_);
    const auto it = map_.find(key);
    if (it == map_.end()) return false;
    order_.splice(order_.begin(), order_, it->second.second);
    value = it->second.first;
    return true;
  }

  void insert(const std::vector<std::size_t>& key, double value) {
    std::lock_guard lock(mu_);
    if (const auto it = map_.find(key); it != map_.end()) return;
    order_.push_front(key);
    map_.emplace(key, std::make_pair(value, order_.begin()));
    if (map_.size() > capacity_) {
      map_.erase(order_.back());
      order_.pop_back();
    }
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return map_.size();
  }

  // Snapshot of all entries (for spot checks).
  std::vector<std::pair<std::vector<std::size_t>, double>> entries() const {
    std::lock_guard lock(mu_);
    std::vector<std::pair<std::vector<std::size_t>, double>> out;
    for (const auto& [k, v] : map_) out.emplace_back(k, v.first);
    std::sort(out.begin(), out.end());
    return out;
  }

 private:
  struct Hash {
    std::size_t operator()(const std::vector<std::size_t>& v) const noexcept {
      std::size_t h = 1469598103934665603ull;
      for (auto x : v) h = (h ^ x) * 1099511628211ull;
      return h;
    }
  };
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::list<std::vector<std::size_t>> order_;
  std::unordered_map<std::vector<std::size_t>, std::pair<double, std::list<std::vector<std::size_t>>::iterator>, Hash>
      map_;
};

// Data and priors shared by every cluster fit.
class ClusterModel {
 public:
  ClusterModel(PartitionTree tree, CountTable counts, SisConfig tau, SisConfig nu, FitOptions fit = {},
               std::size_t cache_capacity = 10000)
      : tree_(std::move(tree)),
        counts_(std::move(counts)),
        tau_(std::move(tau)),
        nu_(std::move(nu)),
        fit_(fit),
        sets_(cache_capacity) {
    if (counts_.samples() == 0) throw InvalidArgument("cluster model needs at least one sample");
    if (!fit_.cache) fit_.cache = &evidence_;
    fit_.threads = 1;  // parallelism is applied across clusters instead
  }

  std::size_t samples() const noexcept { return counts_.samples(); }
  const PartitionTree& tree() const noexcept { return tree_; }
  const CountTable& counts() const noexcept { return counts_; }

  // log f(X_set); the order of `set` is irrelevant.
  double cluster_log_ml(std::vector<std::size_t> set) {
    if (set.empty()) throw InvalidArgument("cluster set must be nonempty");
    std::sort(set.begin(), set.end());
    if (std::adjacent_find(set.begin(), set.end()) != set.end()) throw InvalidArgument("cluster set has duplicates");
    if (set.back() >= samples()) throw InvalidArgument("cluster set index out of range");
    double v;
    if (sets_.find(set, v)) return v;
    v = fresh_log_ml(set);
    sets_.insert(set, v);
    return v;
  }

  // Uncached evaluation.
  double fresh_log_ml(const std::vector<std::size_t>& sorted_set) const {
    return HaptFit::fit(tree_, counts_.select(sorted_set), tau_, nu_, fit_).log_ml();
  }

  // log f(X_i | X_cluster).
  double predictive_log_ml(std::size_t i, const std::vector<std::size_t>& cluster) {
    if (std::find(cluster.begin(), cluster.end(), i) != cluster.end())
      throw InvalidArgument("sample " + std::to_string(i) + " is already in the cluster");
    if (cluster.empty()) return cluster_log_ml({i});
    auto joint = cluster;
    joint.push_back(i);
    return cluster_log_ml(joint) - cluster_log_ml(cluster);
  }

  const SetCache& set_cache() const noexcept { return sets_; }

 private:
  PartitionTree tree_;
  CountTable counts_;
  SisConfig tau_;
  SisConfig nu_;
  FitOptions fit_;
  EvidenceCache evidence_;
  SetCache sets_;
};

struct DpmOptions {
  double alpha = 1.0;
  std::size_t burnin = 500;
  std::size_t draws = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

struct ClusterState {
  std::vector<int> assignment;  // cluster label per sample
  double alpha = 1.0;
};

// Labels renumbered 0, 1, ... in order of first appearance.
inline std::vector<int> canonical_labels(const std::vector<int>& labels) {
  std::map<int, int> remap;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto [it, inserted] = remap.try_emplace(labels[i], static_cast<int>(remap.size()));
    out[i] = it->second;
  }
  return out;
}

inline std::vector<std::vector<std::size_t>> clusters_of(const std::vector<int>& labels) {
  const auto c = canonical_labels(labels);
  int k = 0;
  for (int v : c) k = std::max(k, v + 1);
  std::vector<std::vector<std::size_t>> out(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < c.size(); ++i) out[static_cast<std::size_t>(c[i])].push_back(i);
  return out;
}

// One urn sweep over all samples in a random order.
inline void gibbs_sweep(ClusterState& state, ClusterModel& model, Rng& rng, unsigned threads = 1) {
  const std::size_t k = model.samples();
  if (state.assignment.size() != k) throw InvalidArgument("assignment length must equal the sample count");
  if (!(state.alpha > 0.0)) throw InvalidArgument("alpha must be > 0");
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i;
  rng.shuffle(order);
  for (std::size_t i : order) {
    state.assignment[i] = -1;
    // Current clusters without i, keyed by label.
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t j = 0; j < k; ++j)
      if (state.assignment[j] >= 0) members[state.assignment[j]].push_back(j);
    std::vector<int> labels;
    std::vector<std::vector<std::size_t>> sets;
    for (auto& [lab, m] : members) {
      labels.push_back(lab);
      sets.push_back(std::move(m));
    }
    std::vector<double> logw(sets.size() + 1);
    parallel_for(sets.size() + 1, threads, [&](std::size_t c) {
      if (c == sets.size())
        logw[c] = std::log(state.alpha) + model.cluster_log_ml({i});
      else
        logw[c] = std::log(static_cast<double>(sets[c].size())) + model.predictive_log_ml(i, sets[c]);
    });
    const double m = log_sum_exp(logw);
    std::vector<double> w(logw.size());
    for (std::size_t c = 0; c < w.size(); ++c) w[c] = std::exp(logw[c] - m);
    const std::size_t pick = rng.categorical(w);
    if (pick < labels.size()) {
      state.assignment[i] = labels[pick];
    } else {
      int fresh = 0;
      for (int lab : state.assignment) fresh = std::max(fresh, lab + 1);
      state.assignment[i] = fresh;
    }
  }
  state.assignment = canonical_labels(state.assignment);
}

// log EPPF of a partition under DP(alpha).
inline double log_eppf(const std::vector<int>& labels, double alpha) {
  const auto cl = clusters_of(labels);
  double v = static_cast<double>(cl.size()) * std::log(alpha) + log_gamma(alpha) -
             log_gamma(alpha + static_cast<double>(labels.size()));
  for (const auto& c : cl) v += log_gamma(static_cast<double>(c.size()));
  return v;
}

// Unnormalised log posterior of a partition.
inline double log_partition_score(const std::vector<int>& labels, double alpha, ClusterModel& model) {
  double v = log_eppf(labels, alpha);
  for (const auto& c : clusters_of(labels)) v += model.cluster_log_ml(c);
  return v;
}

struct ChainSummary {
  std::vector<std::vector<double>> coclustering;
  std::map<std::size_t, std::size_t> n_clusters_hist;
  std::vector<std::vector<int>> draws;
  std::vector<int> modal;  // retained draw with the highest posterior score
  double modal_score = 0.0;
};

inline ChainSummary run_chain(ClusterModel& model, const DpmOptions& opt) {
  if (!(opt.alpha > 0.0)) throw InvalidArgument("alpha must be > 0");
  const std::size_t k = model.samples();
  // Stream id separates the sampler from the simulators' per-sample streams.
  Rng rng(opt.seed, 0xD1A1C0DEull << 20);
  ClusterState state;
  state.alpha = opt.alpha;
  state.assignment.resize(k);
  for (std::size_t i = 0; i < k; ++i) state.assignment[i] = static_cast<int>(i);

  ChainSummary out;
  out.coclustering.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t s = 0; s < opt.burnin; ++s) gibbs_sweep(state, model, rng, opt.threads);
  std::map<std::vector<int>, double> scores;
  for (std::size_t s = 0; s < opt.draws; ++s) {
    gibbs_sweep(state, model, rng, opt.threads);
    out.draws.push_back(state.assignment);
    const auto& a = state.assignment;
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j)
        if (a[i] == a[j]) out.coclustering[i][j] += 1.0;
    const auto cl = clusters_of(a);
    ++out.n_clusters_hist[cl.size()];
    if (!scores.count(a)) {
      const double sc = log_partition_score(a, opt.alpha, model);
      scores.emplace(a, sc);
      if (out.modal.empty() || sc > out.modal_score) {
        out.modal = a;
        out.modal_score = sc;
      }
    }
  }
  if (opt.draws == 0) {
    for (std::size_t i = 0; i < k; ++i) out.coclustering[i][i] = 1.0;
  } else {
    for (auto& row : out.coclustering)
      for (double& v : row) v /= static_cast<double>(opt.draws);
  }
  return out;
}

// Adjusted Rand index between two labelings of the same items.
inline double adjusted_rand_index(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) throw InvalidArgument("labelings differ in length");
  const auto ca = canonical_labels(a);
  const auto cb = canonical_labels(b);
  std::map<std::pair<int, int>, double> nij;
  std::map<int, double> ai, bj;
  for (std::size_t t = 0; t < ca.size(); ++t) {
    nij[{ca[t], cb[t]}] += 1;
    ai[ca[t]] += 1;
    bj[cb[t]] += 1;
  }
  auto c2 = [](double n) { return n * (n - 1) / 2; };
  double sum_ij = 0, sum_a = 0, sum_b = 0;
  for (const auto& [k, v] : nij) sum_ij += c2(v);
  for (const auto& [k, v] : ai) sum_a += c2(v);
  for (const auto& [k, v] : bj) sum_b += c2(v);
  const double total = c2(static_cast<double>(ca.size()));
  const double expected = total > 0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;
  return (sum_ij - expected) / (max_index - expected);
}

}  // namespace hapt
