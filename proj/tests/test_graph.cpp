#include <doctest.h>

#include <algorithm>
#include <limits>

#include "infgnn/errors.hpp"
#include "infgnn/graph.hpp"
#include "infgnn/synth.hpp"
#include "infgnn/distrib.hpp"
#include "support.hpp"

using namespace infgnn;
using testing::ids;

namespace {

IntervalGraph path3() {
  return IntervalGraph(1, ids({1, 2, 3}), {{NodeId(1), NodeId(2), 1.0}, {NodeId(2), NodeId(3), 1.0}});
}

// All-pairs shortest paths by Floyd-Warshall on hop counts.
std::vector<std::vector<int>> floyd_warshall(const IntervalGraph& g) {
  const std::size_t n = g.size();
  const int inf = std::numeric_limits<int>::max() / 4;
  std::vector<std::vector<int>> d(n, std::vector<int>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  const auto a = g.adjacency_matrix();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (a[i * n + j] > 0) d[i][j] = 1;
    }
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
    }
  }
  return d;
}

}  // namespace

TEST_CASE("node sets") {
  const NodeSet a = ids({3, 1, 2, 2});
  CHECK(a == ids({1, 2, 3}));
  CHECK(set_intersection(ids({1, 2, 3}), ids({2, 3, 4})) == ids({2, 3}));
  CHECK(set_difference(ids({1, 2, 3}), ids({2, 3, 4})) == ids({1}));
  CHECK(is_subset(ids({2}), ids({1, 2})));
  CHECK_FALSE(is_subset(ids({5}), ids({1, 2})));
}

TEST_CASE("interval graph validation") {
  const auto n = ids({1, 2, 3});
  CHECK_THROWS_AS(IntervalGraph(1, n, {{NodeId(1), NodeId(1), 1.0}}), ValidationError);
  CHECK_THROWS_AS(IntervalGraph(1, n, {{NodeId(1), NodeId(9), 1.0}}), ValidationError);
  CHECK_THROWS_AS(IntervalGraph(1, n, {{NodeId(1), NodeId(2), -1.0}}), ValidationError);
  CHECK_THROWS_AS(IntervalGraph(1, n, {{NodeId(1), NodeId(2), 1.0}, {NodeId(2), NodeId(1), 2.0}}),
                  ValidationError);
  CHECK_THROWS_AS(IntervalGraph(1, {NodeId(1), NodeId(1)}, {}), ValidationError);

  const IntervalGraph g(1, n, {{NodeId(2), NodeId(1), 2.5}, {NodeId(1), NodeId(3), 0.0}});
  CHECK(g.edges().size() == 1);
  CHECK(g.has_edge(NodeId(1), NodeId(2)));
  CHECK(g.weight(NodeId(2), NodeId(1)) == 2.5);
  CHECK_FALSE(g.has_edge(NodeId(1), NodeId(3)));
}

TEST_CASE("adjacency matrix is symmetric with zero diagonal") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const IntervalGraph g = testing::random_graph(1, testing::range_ids(0, 9), 0.4, rng);
    const auto a = g.adjacency_matrix();
    const std::size_t n = g.size();
    REQUIRE(a.size() == n * n);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(a[i * n + i] == 0.0);
      for (std::size_t j = 0; j < n; ++j) {
        CHECK(a[i * n + j] == a[j * n + i]);
        CHECK((a[i * n + j] > 0) == g.has_edge(g.node_at(i), g.node_at(j)));
      }
    }
  }
}

TEST_CASE("from_dense rejects asymmetric and diagonal entries") {
  const std::vector<double> asym = {0, 1, 0, 0};
  CHECK_THROWS_AS(IntervalGraph::from_dense(3, ids({1, 2}), asym), ValidationError);
  const std::vector<double> diag = {1, 0, 0, 0};
  CHECK_THROWS_AS(IntervalGraph::from_dense(3, ids({1, 2}), diag), ValidationError);
  const std::vector<double> ok = {0, 2, 2, 0};
  CHECK(IntervalGraph::from_dense(3, ids({1, 2}), ok).weight(NodeId(1), NodeId(2)) == 2.0);
}

TEST_CASE("node churn") {
  const IntervalGraph prev(1, ids({1, 2, 3}), {});
  const IntervalGraph curr(2, ids({2, 3, 4}), {});
  const NodeChurn c = node_churn(prev, curr);
  CHECK(c.persisting == ids({2, 3}));
  CHECK(c.added == ids({4}));
  CHECK(c.removed == ids({1}));

  const NodeChurn same = node_churn(prev, prev);
  CHECK(same.persisting == prev.nodes());
  CHECK(same.added.empty());
  CHECK(same.removed.empty());
}

TEST_CASE("node churn partitions both node sets") {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution keep(0.6);
  for (int trial = 0; trial < 50; ++trial) {
    NodeSet a, b;
    for (std::uint32_t i = 0; i < 15; ++i) {
      if (keep(rng)) a.emplace_back(i);
      if (keep(rng)) b.emplace_back(i);
    }
    const NodeChurn c = node_churn(IntervalGraph(1, a, {}), IntervalGraph(2, b, {}));
    NodeSet prev = c.persisting, curr = c.persisting;
    prev.insert(prev.end(), c.removed.begin(), c.removed.end());
    curr.insert(curr.end(), c.added.begin(), c.added.end());
    CHECK(make_node_set(prev) == a);
    CHECK(make_node_set(curr) == b);
    CHECK(set_intersection(c.added, c.removed).empty());
    CHECK(set_intersection(c.persisting, c.added).empty());
  }
}

TEST_CASE("k-hop neighbours") {
  const IntervalGraph g = path3();
  CHECK(k_hop_neighbors(g, NodeId(1), 1) == ids({2}));
  CHECK(k_hop_neighbors(g, NodeId(1), 2) == ids({2, 3}));
  CHECK_THROWS_AS(k_hop_neighbors(g, NodeId(7), 1), LookupError);
  CHECK_THROWS_AS(k_hop_neighbors(g, NodeId(1), 0), ArgumentError);
}

TEST_CASE("k-hop neighbours match Floyd-Warshall on small graphs") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const std::uint32_t n = 2 + static_cast<std::uint32_t>(seed % 9);
    const IntervalGraph g = testing::random_graph(1, testing::range_ids(10, n), 0.3, rng);
    const auto d = floyd_warshall(g);
    for (int k = 1; k <= 3; ++k) {
      for (std::size_t v = 0; v < g.size(); ++v) {
        NodeSet expected;
        for (std::size_t u = 0; u < g.size(); ++u) {
          if (u != v && d[v][u] <= k) expected.push_back(g.node_at(u));
        }
        CHECK(k_hop_neighbors(g, g.node_at(v), k) == expected);
      }
    }
  }
}

TEST_CASE("induced subgraph") {
  const IntervalGraph tri(1, ids({1, 2, 3}),
                          {{NodeId(1), NodeId(2), 1.0}, {NodeId(2), NodeId(3), 2.0},
                           {NodeId(1), NodeId(3), 3.0}});
  const IntervalGraph sub = induced_subgraph(tri, ids({1, 2}));
  REQUIRE(sub.edges().size() == 1);
  CHECK(sub.weight(NodeId(1), NodeId(2)) == 1.0);

  const IntervalGraph same = induced_subgraph(tri, tri.nodes());
  CHECK(same.adjacency_matrix() == tri.adjacency_matrix());

  const IntervalGraph empty = induced_subgraph(tri, {});
  CHECK(empty.size() == 0);

  CHECK_THROWS_AS(induced_subgraph(tri, ids({1, 9})), ArgumentError);
}

TEST_CASE("induced subgraph composes") {
  std::mt19937_64 rng(21);
  std::bernoulli_distribution keep(0.6);
  for (int trial = 0; trial < 30; ++trial) {
    const IntervalGraph g = testing::random_graph(1, testing::range_ids(0, 10), 0.4, rng);
    NodeSet a, b;
    for (NodeId v : g.nodes()) {
      if (keep(rng)) {
        a.push_back(v);
        if (keep(rng)) b.push_back(v);
      }
    }
    const IntervalGraph two = induced_subgraph(induced_subgraph(g, a), b);
    const IntervalGraph one = induced_subgraph(g, b);
    CHECK(two.nodes() == one.nodes());
    CHECK(two.adjacency_matrix() == one.adjacency_matrix());
  }
}

TEST_CASE("feature tensor and crop") {
  FeatureTensor x(ids({5, 7}), 2, 3);
  x.at(1, 1, 2) = 4.0;
  CHECK(x.row_of(NodeId(7)) == 1);
  CHECK(x.node_values(1)[5] == 4.0);
  CHECK_THROWS(x.row_of(NodeId(1)));
  const FeatureTensor c = crop_features(x, ids({7}));
  CHECK(c.node_count() == 1);
  CHECK(c.at(0, 1, 2) == 4.0);
}

TEST_CASE("sequence validation") {
  const IntervalGraph g1(1, ids({1, 2}), {{NodeId(1), NodeId(2), 1.0}});
  const IntervalGraph g2(2, ids({2, 3}), {{NodeId(2), NodeId(3), 1.0}});
  FeatureTensor x1(ids({1, 2}), 1, 4), x2(ids({2, 3}), 1, 4);
  CHECK_NOTHROW(DynamicGraphSequence({{g1, x1}, {g2, x2}}));

  CHECK_THROWS_AS(DynamicGraphSequence({{g2, x2}, {g1, x1}}), ValidationError);

  FeatureTensor bad = x2;
  bad.at(0, 0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(DynamicGraphSequence({{g1, x1}, {g2, bad}}), ValidationError);

  const IntervalGraph g3(2, ids({8, 9}), {});
  FeatureTensor x3(ids({8, 9}), 1, 4);
  CHECK_THROWS_AS(DynamicGraphSequence({{g1, x1}, {g3, x3}}), ValidationError);

  FeatureTensor wrong_rows(ids({1}), 1, 4);
  CHECK_THROWS_AS(DynamicGraphSequence({{g1, wrong_rows}}), ValidationError);
}

TEST_CASE("synthetic generator") {
  SynthConfig c;
  c.intervals = 3;
  c.initial_nodes = 50;
  c.growth = 5;
  c.steps = 600;
  c.stable_fraction = 0.3;
  const SyntheticDataset a = generate_synthetic_drift(c, 7);
  const SyntheticDataset b = generate_synthetic_drift(c, 7);

  SUBCASE("deterministic") {
    REQUIRE(a.sequence.size() == b.sequence.size());
    for (std::size_t t = 0; t < a.sequence.size(); ++t) {
      CHECK(a.sequence[t].graph.adjacency_matrix() == b.sequence[t].graph.adjacency_matrix());
      const auto va = a.sequence[t].features.values(), vb = b.sequence[t].features.values();
      CHECK(std::equal(va.begin(), va.end(), vb.begin(), vb.end()));
    }
  }
  SUBCASE("growth and stable count") {
    CHECK(a.sequence[0].graph.size() == 50);
    CHECK(a.sequence[2].graph.size() == 60);
    // 15 of the initial 50 plus round(0.3 * 5) = 2 per growth batch
    NodeSet initial_stable;
    for (NodeId v : a.stable) {
      if (v.value() < 50) initial_stable.push_back(v);
    }
    CHECK(initial_stable.size() == 15);
    CHECK(a.stable.size() == 15 + 2 * 2);
  }
  SUBCASE("new nodes are wired to existing ones") {
    for (std::size_t t = 1; t < a.sequence.size(); ++t) {
      const NodeChurn churn = node_churn(a.sequence[t - 1].graph, a.sequence[t].graph);
      CHECK(churn.added.size() == 5);
      for (NodeId v : churn.added) {
        const auto& g = a.sequence[t].graph;
        bool linked = false;
        for (const Neighbor& nb : g.neighbors(g.index_of(v))) {
          linked = linked || std::binary_search(churn.persisting.begin(), churn.persisting.end(),
                                                g.node_at(nb.index));
        }
        CHECK(linked);
      }
    }
  }
  SUBCASE("stable nodes keep their distribution") {
    c.drift_strength = 0.0;
    c.steps = 2016;
    const SyntheticDataset s = generate_synthetic_drift(c, 3);
    double worst = 0.0;
    for (NodeId v : s.sequence[0].graph.nodes()) {
      const auto& x0 = s.sequence[0].features;
      const auto& x1 = s.sequence[1].features;
      worst = std::max(worst, sample_jsd(x0.node_values(x0.row_of(v)), x1.node_values(x1.row_of(v))));
    }
    CHECK(worst < 0.05);
  }
  SUBCASE("removals that empty the graph are rejected") {
    c.removals = 60;
    CHECK_THROWS_AS(generate_synthetic_drift(c, 1), ConfigError);
  }
}
