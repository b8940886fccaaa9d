#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

namespace infgnn {

// Stable node identity across the whole sequence lifetime.
class NodeId {
 public:
  constexpr NodeId() = default;
  constexpr explicit NodeId(std::uint32_t value) : value_(value) {}
  constexpr std::uint32_t value() const { return value_; }
  friend constexpr auto operator<=>(NodeId, NodeId) = default;

 private:
  std::uint32_t value_ = 0;
};

std::ostream& operator<<(std::ostream& os, NodeId id);

// Sorted ascending, no duplicates.
using NodeSet = std::vector<NodeId>;

NodeSet make_node_set(std::vector<NodeId> ids);
NodeSet set_intersection(const NodeSet& a, const NodeSet& b);
NodeSet set_difference(const NodeSet& a, const NodeSet& b);
bool is_subset(const NodeSet& sub, const NodeSet& super);

struct Edge {
  NodeId u;
  NodeId v;
  double weight = 1.0;
};

struct Neighbor {
  std::size_t index;
  double weight;
};

// One interval's undirected graph. Nodes are kept in ascending NodeId order;
// that order is the row/column order of the adjacency matrix.
class IntervalGraph {
 public:
  IntervalGraph() = default;
  // Throws ValidationError on self loops, asymmetric duplicates, negative
  // weights, or endpoints outside `nodes`. Zero-weight edges are dropped.
  IntervalGraph(int interval_index, std::vector<NodeId> nodes,
                std::vector<Edge> edges);

  // Builds from a dense row-major N x N matrix in the order of `nodes`.
  static IntervalGraph from_dense(int interval_index, std::vector<NodeId> nodes,
                                  std::span<const double> adjacency);

  int interval_index() const { return interval_index_; }
  const NodeSet& nodes() const { return nodes_; }
  std::size_t size() const { return nodes_.size(); }
  bool contains(NodeId id) const;
  std::size_t index_of(NodeId id) const;
  NodeId node_at(std::size_t index) const { return nodes_[index]; }

  // Canonical edges (u < v), sorted.
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const Neighbor> neighbors(std::size_t index) const;
  bool has_edge(NodeId a, NodeId b) const;
  double weight(NodeId a, NodeId b) const;

  std::vector<double> adjacency_matrix() const;

 private:
  void build_neighbor_lists();

  int interval_index_ = 0;
  NodeSet nodes_;
  std::unordered_map<std::uint32_t, std::size_t> index_;
  std::vector<Edge> edges_;
  std::vector<std::size_t> row_start_;
  std::vector<Neighbor> adjacency_;
};

// Per-interval node recordings, shape nodes x features x steps, row-major.
class FeatureTensor {
 public:
  FeatureTensor() = default;
  FeatureTensor(std::vector<NodeId> node_order, std::size_t features,
                std::size_t steps);
  FeatureTensor(std::vector<NodeId> node_order, std::size_t features,
                std::size_t steps, std::vector<double> values);

  const std::vector<NodeId>& node_order() const { return node_order_; }
  std::size_t node_count() const { return node_order_.size(); }
  std::size_t features() const { return features_; }
  std::size_t steps() const { return steps_; }

  double& at(std::size_t node, std::size_t feature, std::size_t step) {
    return values_[(node * features_ + feature) * steps_ + step];
  }
  double at(std::size_t node, std::size_t feature, std::size_t step) const {
    return values_[(node * features_ + feature) * steps_ + step];
  }
  // All of one node's values, flattened over features then steps.
  std::span<const double> node_values(std::size_t node) const;
  std::span<double> node_values(std::size_t node);
  std::span<const double> values() const { return values_; }

  std::size_t row_of(NodeId id) const;
  bool all_finite() const;

 private:
  std::vector<NodeId> node_order_;
  std::unordered_map<std::uint32_t, std::size_t> index_;
  std::size_t features_ = 0;
  std::size_t steps_ = 0;
  std::vector<double> values_;
};

struct IntervalData {
  IntervalGraph graph;
  FeatureTensor features;
};

class DynamicGraphSequence {
 public:
  DynamicGraphSequence() = default;
  // Validates every invariant; throws ValidationError naming the interval.
  explicit DynamicGraphSequence(std::vector<IntervalData> intervals);

  std::size_t size() const { return intervals_.size(); }
  const IntervalData& operator[](std::size_t i) const { return intervals_[i]; }
  const std::vector<IntervalData>& intervals() const { return intervals_; }
  std::size_t features() const;
  std::size_t steps() const;

 private:
  std::vector<IntervalData> intervals_;
};

struct NodeChurn {
  NodeSet persisting;
  NodeSet added;
  NodeSet removed;
};

NodeChurn node_churn(const IntervalGraph& prev, const IntervalGraph& curr);

// Nodes at shortest-path distance 1..k from v (v excluded).
NodeSet k_hop_neighbors(const IntervalGraph& g, NodeId v, int k);

// Hop distance from v to every node by index; unreachable nodes get -1.
std::vector<int> hop_distances(const IntervalGraph& g, NodeId v);

IntervalGraph induced_subgraph(const IntervalGraph& g, const NodeSet& keep);

// Rows of `x` for `keep`, in `keep` order.
FeatureTensor crop_features(const FeatureTensor& x, const NodeSet& keep);

}  // namespace infgnn

template <>
struct std::hash<infgnn::NodeId> {
  std::size_t operator()(infgnn::NodeId id) const noexcept {
    return std::hash<std::uint32_t>{}(id.value());
  }
};
