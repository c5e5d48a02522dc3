#pragma once

// Truncated recursive dyadic partition of an interval, per-sample node
// counts, and base-measure geometry.
//
// Nodes are addressed by (level, index) and stored in heap order:
// heap(level, index) = 2^level - 1 + index. Levels 0..depth-1 are internal
// (they carry a mass split theta); level `depth` holds the leaves.
// Cells are left-open and right-closed, so a point sitting exactly on a
// split belongs to the left child. The domain's left endpoint is accepted
// and falls in the leftmost leaf.

#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hapt/error.hpp"

namespace hapt {

struct NodeId {
  int level = 0;
  std::int64_t index = 0;

  static constexpr NodeId root() { return {0, 0}; }
  NodeId left() const { return {level + 1, 2 * index}; }
  NodeId right() const { return {level + 1, 2 * index + 1}; }
  NodeId parent() const {
    if (level == 0) throw InvalidArgument("root node has no parent");
    return {level - 1, index / 2};
  }
  std::size_t heap() const { return (std::size_t{1} << level) - 1 + static_cast<std::size_t>(index); }
  static NodeId from_heap(std::size_t h) {
    int level = 0;
    while (((std::size_t{1} << (level + 1)) - 1) <= h) ++level;
    return {level, static_cast<std::int64_t>(h - ((std::size_t{1} << level) - 1))};
  }
  auto operator<=>(const NodeId&) const = default;
};

inline std::string to_string(NodeId id) {
  std::ostringstream os;
  os << "(" << id.level << "," << id.index << ")";
  return os.str();
}

struct Interval {
  double lo = 0.0;
  double hi = 1.0;
  double width() const { return hi - lo; }
  bool contains(double x) const { return x >= lo && x <= hi; }
};

// Base measure. An empty theta0 list means the uniform base (theta0 = 1/2
// everywhere); otherwise one split fraction per internal node in heap order.
struct BaseMeasure {
  std::vector<double> theta0;
  static BaseMeasure uniform() { return {}; }
};

// One step along a root-to-leaf path.
struct PathStep {
  NodeId node;
  bool left;
};

class PartitionTree {
 public:
  PartitionTree() = default;

  static PartitionTree build(int depth, Interval domain, const BaseMeasure& base = BaseMeasure::uniform()) {
    if (depth <= 0) throw InvalidArgument("tree depth must be >= 1, got " + std::to_string(depth));
    if (depth > 30) throw InvalidArgument("tree depth must be <= 30, got " + std::to_string(depth));
    if (!(std::isfinite(domain.lo) && std::isfinite(domain.hi)) || !(domain.lo < domain.hi))
      throw InvalidArgument("domain must satisfy lo < hi");
    PartitionTree t;
    t.depth_ = depth;
    t.domain_ = domain;
    const std::size_t internal = (std::size_t{1} << depth) - 1;
    if (base.theta0.empty()) {
      t.theta0_.assign(internal, 0.5);
    } else {
      if (base.theta0.size() != internal)
        throw InvalidArgument("base measure needs " + std::to_string(internal) + " theta0 values, got " +
                              std::to_string(base.theta0.size()));
      for (double v : base.theta0)
        if (!(v > 0.0 && v < 1.0)) throw InvalidArgument("theta0 values must lie in (0,1)");
      t.theta0_ = base.theta0;
    }
    return t;
  }

  int depth() const noexcept { return depth_; }
  const Interval& domain() const noexcept { return domain_; }
  std::size_t node_count() const noexcept { return (std::size_t{1} << (depth_ + 1)) - 1; }
  std::size_t internal_count() const noexcept { return (std::size_t{1} << depth_) - 1; }
  std::size_t leaf_count() const noexcept { return std::size_t{1} << depth_; }
  bool is_leaf(NodeId id) const { return id.level == depth_; }
  std::span<const double> theta0_values() const noexcept { return theta0_; }
  bool uniform_base() const {
    for (double v : theta0_)
      if (v != 0.5) return false;
    return true;
  }

  bool valid(NodeId id) const {
    return id.level >= 0 && id.level <= depth_ && id.index >= 0 && id.index < (std::int64_t{1} << id.level);
  }

  Interval span(NodeId id) const {
    check(id);
    const double cells = std::ldexp(1.0, id.level);
    const double w = domain_.width();
    return {domain_.lo + w * (static_cast<double>(id.index) / cells),
            domain_.lo + w * (static_cast<double>(id.index + 1) / cells)};
  }

  // Split point between the two children of an internal node.
  double midpoint(NodeId id) const {
    check(id);
    const double cells = std::ldexp(1.0, id.level + 1);
    return domain_.lo + domain_.width() * (static_cast<double>(2 * id.index + 1) / cells);
  }

  double theta0(NodeId id) const {
    check(id);
    if (is_leaf(id)) throw InvalidArgument("leaf " + to_string(id) + " has no split");
    return theta0_[id.heap()];
  }

  // Internal nodes containing x, root first, with the side x falls on.
  std::vector<PathStep> path(double x) const {
    require_inside(x);
    std::vector<PathStep> steps;
    steps.reserve(static_cast<std::size_t>(depth_));
    NodeId cur = NodeId::root();
    for (int l = 0; l < depth_; ++l) {
      const bool left = x <= midpoint(cur);
      steps.push_back({cur, left});
      cur = left ? cur.left() : cur.right();
    }
    return steps;
  }

  NodeId leaf_of(double x) const {
    require_inside(x);
    NodeId cur = NodeId::root();
    for (int l = 0; l < depth_; ++l) cur = x <= midpoint(cur) ? cur.left() : cur.right();
    return cur;
  }

  // Base-measure mass Q0 of a node (product of theta0 splits to the root).
  double base_mass(NodeId id) const {
    check(id);
    double m = 1.0;
    NodeId cur = id;
    while (cur.level > 0) {
      const NodeId par = cur.parent();
      const double t = theta0_[par.heap()];
      m *= (cur.index % 2 == 0) ? t : 1.0 - t;
      cur = par;
    }
    return m;
  }

  double leaf_width() const { return domain_.width() / std::ldexp(1.0, depth_); }

 private:
  void check(NodeId id) const {
    if (!valid(id)) throw InvalidArgument("node " + to_string(id) + " is not in a depth-" + std::to_string(depth_) + " tree");
  }
  void require_inside(double x) const {
    if (!domain_.contains(x)) {
      std::ostringstream os;
      os << "point " << x << " outside domain [" << domain_.lo << ", " << domain_.hi << "]";
      throw DomainError(os.str(), x, 0);
    }
  }

  int depth_ = 0;
  Interval domain_{};
  std::vector<double> theta0_;
};

// Closure density below the truncation level: uniform within the leaf.
inline double leaf_uniform_density(const PartitionTree& tree, double x) {
  (void)tree.leaf_of(x);  // validates x
  return 1.0 / tree.leaf_width();
}

// Counts n_i(A) for every node A and sample i.
class CountTable {
 public:
  CountTable() = default;
  CountTable(std::size_t samples, std::size_t nodes) : k_(samples), nodes_(nodes), n_(samples * nodes, 0) {}

  std::size_t samples() const noexcept { return k_; }
  std::size_t nodes() const noexcept { return nodes_; }

  std::int64_t count(std::size_t sample, NodeId id) const { return n_[sample * nodes_ + id.heap()]; }
  std::int64_t left(std::size_t sample, NodeId id) const { return count(sample, id.left()); }
  std::int64_t right(std::size_t sample, NodeId id) const { return count(sample, id.right()); }
  std::int64_t total(NodeId id) const {
    std::int64_t s = 0;
    for (std::size_t i = 0; i < k_; ++i) s += count(i, id);
    return s;
  }
  std::int64_t sample_size(std::size_t sample) const { return n_[sample * nodes_]; }
  std::int64_t total_size() const { return total(NodeId::root()); }

  // Raw per-sample row over all nodes in heap order.
  std::span<const std::int64_t> row(std::size_t sample) const {
    return {n_.data() + sample * nodes_, nodes_};
  }

  // Builds a table from leaf counts (one row of 2^depth values per sample).
  static CountTable from_leaf_counts(int depth, const std::vector<std::vector<std::int64_t>>& leaves) {
    const std::size_t nodes = (std::size_t{1} << (depth + 1)) - 1;
    const std::size_t first_leaf = (std::size_t{1} << depth) - 1;
    CountTable t(leaves.size(), nodes);
    for (std::size_t i = 0; i < leaves.size(); ++i) {
      if (leaves[i].size() != (std::size_t{1} << depth)) throw InvalidArgument("leaf count row has wrong length");
      std::int64_t* r = t.n_.data() + i * nodes;
      for (std::size_t j = 0; j < leaves[i].size(); ++j) {
        if (leaves[i][j] < 0) throw InvalidArgument("negative leaf count");
        r[first_leaf + j] = leaves[i][j];
      }
      for (std::size_t h = first_leaf; h-- > 0;) r[h] = r[2 * h + 1] + r[2 * h + 2];
    }
    return t;
  }

  std::vector<std::int64_t> leaf_counts(std::size_t sample, int depth) const {
    const std::size_t first_leaf = (std::size_t{1} << depth) - 1;
    const auto r = row(sample);
    return {r.begin() + static_cast<std::ptrdiff_t>(first_leaf), r.end()};
  }

  // Table restricted to a subset of samples, in the given order.
  CountTable select(std::span<const std::size_t> which) const {
    CountTable t(which.size(), nodes_);
    for (std::size_t a = 0; a < which.size(); ++a) {
      if (which[a] >= k_) throw InvalidArgument("sample index out of range");
      std::copy_n(n_.begin() + static_cast<std::ptrdiff_t>(which[a] * nodes_), nodes_,
                  t.n_.begin() + static_cast<std::ptrdiff_t>(a * nodes_));
    }
    return t;
  }

  bool operator==(const CountTable&) const = default;

 private:
  friend CountTable bin_data(const PartitionTree&, const std::vector<std::vector<double>>&);
  std::size_t k_ = 0;
  std::size_t nodes_ = 0;
  std::vector<std::int64_t> n_;
};

inline CountTable bin_data(const PartitionTree& tree, const std::vector<std::vector<double>>& samples) {
  if (samples.empty()) throw InvalidArgument("bin_data needs at least one sample");
  CountTable t(samples.size(), tree.node_count());
  const std::size_t first_leaf = tree.internal_count();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::int64_t* r = t.n_.data() + i * t.nodes_;
    for (double x : samples[i]) {
      if (!tree.domain().contains(x) || std::isnan(x)) {
        std::ostringstream os;
        os << "observation " << x << " in sample " << i << " outside domain [" << tree.domain().lo << ", "
           << tree.domain().hi << "]";
        throw DomainError(os.str(), x, i);
      }
      r[tree.leaf_of(x).heap()] += 1;
    }
    for (std::size_t h = first_leaf; h-- > 0;) r[h] = r[2 * h + 1] + r[2 * h + 2];
  }
  return t;
}

}  // namespace hapt
