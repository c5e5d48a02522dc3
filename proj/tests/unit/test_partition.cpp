#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "hapt/partition.hpp"

using namespace hapt;

TEST(NodeId, ChildrenAndParent) {
  const NodeId a{2, 3};
  EXPECT_EQ(a.left(), (NodeId{3, 6}));
  EXPECT_EQ(a.right(), (NodeId{3, 7}));
  EXPECT_EQ(a.left().parent(), a);
  EXPECT_EQ(a.right().parent(), a);
  EXPECT_EQ(NodeId::root(), (NodeId{0, 0}));
  for (std::size_t h = 0; h < 63; ++h) EXPECT_EQ(NodeId::from_heap(h).heap(), h);
}

TEST(BuildTree, DepthTwoUnit) {
  const auto t = PartitionTree::build(2, {0.0, 1.0});
  EXPECT_EQ(t.node_count(), 7u);
  EXPECT_DOUBLE_EQ(t.span({1, 1}).lo, 0.5);
  EXPECT_DOUBLE_EQ(t.span({1, 1}).hi, 1.0);
  for (std::size_t h = 0; h < t.internal_count(); ++h) EXPECT_EQ(t.theta0(NodeId::from_heap(h)), 0.5);
}

TEST(BuildTree, DepthOneWideDomain) {
  const auto t = PartitionTree::build(1, {0.0, 2.0});
  EXPECT_DOUBLE_EQ(t.span({1, 0}).hi, 1.0);
  EXPECT_DOUBLE_EQ(t.span({1, 1}).lo, 1.0);
  EXPECT_DOUBLE_EQ(t.span({1, 1}).hi, 2.0);
}

TEST(BuildTree, UniformInternalSplitsAreHalf) {
  const auto t = PartitionTree::build(3, {0.0, 1.0});
  EXPECT_EQ(t.internal_count(), 7u);
  for (double v : t.theta0_values()) EXPECT_EQ(v, 0.5);
}

TEST(BuildTree, RejectsBadArguments) {
  EXPECT_THROW(PartitionTree::build(0, {0.0, 1.0}), InvalidArgument);
  EXPECT_THROW(PartitionTree::build(-1, {0.0, 1.0}), InvalidArgument);
  EXPECT_THROW(PartitionTree::build(2, {1.0, 1.0}), InvalidArgument);
  EXPECT_THROW(PartitionTree::build(2, {1.0, 0.0}), InvalidArgument);
  EXPECT_THROW(PartitionTree::build(2, {0.0, 1.0}, BaseMeasure{{0.5, 0.5}}), InvalidArgument);
  EXPECT_THROW(PartitionTree::build(1, {0.0, 1.0}, BaseMeasure{{1.0}}), InvalidArgument);
}

TEST(BuildTree, NonUniformBaseMass) {
  const auto t = PartitionTree::build(2, {0.0, 1.0}, BaseMeasure{{0.25, 0.5, 0.8}});
  EXPECT_DOUBLE_EQ(t.base_mass({1, 0}), 0.25);
  EXPECT_DOUBLE_EQ(t.base_mass({2, 3}), 0.75 * 0.2);
  double s = 0.0;
  for (int j = 0; j < 4; ++j) s += t.base_mass({2, j});
  EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(BinData, SimpleCounts) {
  const auto t = PartitionTree::build(1, {0.0, 1.0});
  const auto c = bin_data(t, {{0.25, 0.75, 0.9}});
  EXPECT_EQ(c.left(0, NodeId::root()), 1);
  EXPECT_EQ(c.right(0, NodeId::root()), 2);
}

TEST(BinData, MidpointGoesLeft) {
  const auto t = PartitionTree::build(1, {0.0, 1.0});
  const auto c = bin_data(t, {{0.5}});
  EXPECT_EQ(c.left(0, NodeId::root()), 1);
  EXPECT_EQ(c.right(0, NodeId::root()), 0);
}

TEST(BinData, TwoSamples) {
  const auto t = PartitionTree::build(2, {0.0, 1.0});
  const auto c = bin_data(t, {{0.1}, {0.6, 0.8}});
  EXPECT_EQ(c.total(NodeId::root()), 3);
  EXPECT_EQ(c.count(1, {1, 1}), 2);
}

TEST(BinData, RejectsOutsideDomain) {
  const auto t = PartitionTree::build(2, {0.0, 1.0});
  try {
    (void)bin_data(t, {{0.5}, {0.2, 1.5}});
    FAIL() << "expected DomainError";
  } catch (const DomainError& e) {
    EXPECT_EQ(e.value(), 1.5);
    EXPECT_EQ(e.sample(), 1u);
  }
  EXPECT_THROW((void)bin_data(t, {{-0.1}}), DomainError);
  EXPECT_THROW((void)bin_data(t, {}), InvalidArgument);
}

TEST(BinData, InternalCountsAreSumsOfChildren) {
  std::mt19937_64 g(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto t = PartitionTree::build(6, {0.0, 1.0});
  std::vector<std::vector<double>> xs(3);
  for (auto& s : xs)
    for (int j = 0; j < 500; ++j) s.push_back(U(g));
  const auto c = bin_data(t, xs);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(c.sample_size(i), 500);
    for (std::size_t h = 0; h < t.internal_count(); ++h) {
      const auto id = NodeId::from_heap(h);
      EXPECT_EQ(c.count(i, id), c.left(i, id) + c.right(i, id));
    }
  }
  EXPECT_EQ(c.total_size(), 1500);
}

TEST(BinData, PermutationInvariantWithinSample) {
  std::mt19937_64 g(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  const auto t = PartitionTree::build(5, {0.0, 1.0});
  std::vector<double> a;
  for (int j = 0; j < 200; ++j) a.push_back(U(g));
  auto b = a;
  std::shuffle(b.begin(), b.end(), g);
  EXPECT_EQ(bin_data(t, {a, {0.3}}), bin_data(t, {b, {0.3}}));
  EXPECT_NE(bin_data(t, {a, {0.3}}), bin_data(t, {{0.3}, a}));
}

TEST(LeafDensity, Values) {
  EXPECT_DOUBLE_EQ(leaf_uniform_density(PartitionTree::build(2, {0.0, 1.0}), 0.3), 4.0);
  EXPECT_DOUBLE_EQ(leaf_uniform_density(PartitionTree::build(1, {0.0, 2.0}), 1.5), 1.0);
  EXPECT_DOUBLE_EQ(leaf_uniform_density(PartitionTree::build(3, {0.0, 1.0}), 0.9), 8.0);
  EXPECT_THROW((void)leaf_uniform_density(PartitionTree::build(3, {0.0, 1.0}), 1.1), DomainError);
}

TEST(Path, LeafOfMatchesSpans) {
  const auto t = PartitionTree::build(4, {0.0, 1.0});
  for (double x : {0.0, 0.0625, 0.07, 0.5, 0.51, 1.0}) {
    const auto leaf = t.leaf_of(x);
    const auto sp = t.span(leaf);
    EXPECT_TRUE(x <= sp.hi && (x > sp.lo || (x == 0.0 && sp.lo == 0.0))) << x;
    const auto path = t.path(x);
    ASSERT_EQ(path.size(), 4u);
    EXPECT_EQ(path.front().node, NodeId::root());
  }
}

TEST(CountTable, LeafCountsRoundTripAndSelect) {
  const auto t = PartitionTree::build(3, {0.0, 1.0});
  const auto c = bin_data(t, {{0.1, 0.2}, {0.9}, {0.55, 0.6, 0.65}});
  std::vector<std::vector<std::int64_t>> leaves;
  for (std::size_t i = 0; i < 3; ++i) leaves.push_back(c.leaf_counts(i, 3));
  EXPECT_EQ(CountTable::from_leaf_counts(3, leaves), c);
  const std::size_t pick[] = {2, 0};
  const auto s = c.select(pick);
  EXPECT_EQ(s.samples(), 2u);
  EXPECT_EQ(s.sample_size(0), 3);
  EXPECT_EQ(s.sample_size(1), 2);
}
