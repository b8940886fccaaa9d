#include "infgnn/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <ostream>
#include <sstream>
#include <utility>

#include "infgnn/errors.hpp"

namespace infgnn {

std::ostream& operator<<(std::ostream& os, NodeId id) {
  return os << id.value();
}

NodeSet make_node_set(std::vector<NodeId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

NodeSet set_intersection(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                        std::back_inserter(out));
  return out;
}

NodeSet set_difference(const NodeSet& a, const NodeSet& b) {
  NodeSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(),
                      std::back_inserter(out));
  return out;
}

bool is_subset(const NodeSet& sub, const NodeSet& super) {
  return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

// ---------------------------------------------------------------------------
// IntervalGraph

IntervalGraph::IntervalGraph(int interval_index, std::vector<NodeId> nodes,
                             std::vector<Edge> edges)
    : interval_index_(interval_index) {
  const std::size_t raw_count = nodes.size();
  nodes_ = make_node_set(std::move(nodes));
  if (nodes_.size() != raw_count) {
    throw ValidationError("interval " + std::to_string(interval_index) +
                          ": duplicate node ids");
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    index_.emplace(nodes_[i].value(), i);
  }

  std::map<std::pair<std::uint32_t, std::uint32_t>, double> canon;
  for (const Edge& e : edges) {
    std::ostringstream where;
    where << "interval " << interval_index << ": edge (" << e.u << "," << e.v
          << ")";
    if (!contains(e.u) || !contains(e.v)) {
      throw ValidationError(where.str() + " references an unknown node");
    }
    if (!std::isfinite(e.weight) || e.weight < 0.0) {
      throw ValidationError(where.str() + " has a negative or non-finite weight");
    }
    if (e.u == e.v) {
      if (e.weight == 0.0) continue;
      throw ValidationError(where.str() + " is a self loop (nonzero diagonal)");
    }
    const std::pair<std::uint32_t, std::uint32_t> key{std::min(e.u.value(), e.v.value()),
                                                      std::max(e.u.value(), e.v.value())};
    auto [it, inserted] = canon.emplace(key, e.weight);
    if (!inserted && it->second != e.weight) {
      throw ValidationError(where.str() + " is not symmetric");
    }
  }
  for (const auto& [key, w] : canon) {
    if (w > 0.0) edges_.push_back({NodeId(key.first), NodeId(key.second), w});
  }
  build_neighbor_lists();
}

IntervalGraph IntervalGraph::from_dense(int interval_index,
                                        std::vector<NodeId> nodes,
                                        std::span<const double> adjacency) {
  const std::size_t n = nodes.size();
  if (adjacency.size() != n * n) {
    throw ValidationError("interval " + std::to_string(interval_index) +
                          ": adjacency is not " + std::to_string(n) + "x" +
                          std::to_string(n));
  }
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < n; ++i) {
    if (adjacency[i * n + i] != 0.0) {
      throw ValidationError("interval " + std::to_string(interval_index) +
                            ": nonzero diagonal");
    }
    for (std::size_t j = i + 1; j < n; ++j) {
      if (adjacency[i * n + j] != adjacency[j * n + i]) {
        throw ValidationError("interval " + std::to_string(interval_index) +
                              ": adjacency is not symmetric");
      }
      if (adjacency[i * n + j] != 0.0) {
        edges.push_back({nodes[i], nodes[j], adjacency[i * n + j]});
      }
    }
  }
  // `nodes` may be unsorted; the constructor re-sorts and edges are by id.
  return IntervalGraph(interval_index, std::move(nodes), std::move(edges));
}

void IntervalGraph::build_neighbor_lists() {
  const std::size_t n = nodes_.size();
  std::vector<std::vector<Neighbor>> rows(n);
  for (const Edge& e : edges_) {
    const std::size_t a = index_of(e.u);
    const std::size_t b = index_of(e.v);
    rows[a].push_back({b, e.weight});
    rows[b].push_back({a, e.weight});
  }
  row_start_.assign(n + 1, 0);
  adjacency_.clear();
  for (std::size_t i = 0; i < n; ++i) {
    std::sort(rows[i].begin(), rows[i].end(),
              [](const Neighbor& x, const Neighbor& y) { return x.index < y.index; });
    row_start_[i] = adjacency_.size();
    adjacency_.insert(adjacency_.end(), rows[i].begin(), rows[i].end());
  }
  row_start_[n] = adjacency_.size();
}

bool IntervalGraph::contains(NodeId id) const {
  return index_.find(id.value()) != index_.end();
}

std::size_t IntervalGraph::index_of(NodeId id) const {
  auto it = index_.find(id.value());
  if (it == index_.end()) {
    throw LookupError("node " + std::to_string(id.value()) +
                      " is not in interval " + std::to_string(interval_index_));
  }
  return it->second;
}

std::span<const Neighbor> IntervalGraph::neighbors(std::size_t index) const {
  return {adjacency_.data() + row_start_[index],
          row_start_[index + 1] - row_start_[index]};
}

bool IntervalGraph::has_edge(NodeId a, NodeId b) const {
  return weight(a, b) > 0.0;
}

double IntervalGraph::weight(NodeId a, NodeId b) const {
  if (!contains(a) || !contains(b)) return 0.0;
  const std::size_t ia = index_of(a);
  const std::size_t ib = index_of(b);
  for (const Neighbor& nb : neighbors(ia)) {
    if (nb.index == ib) return nb.weight;
  }
  return 0.0;
}

std::vector<double> IntervalGraph::adjacency_matrix() const {
  const std::size_t n = nodes_.size();
  std::vector<double> dense(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (const Neighbor& nb : neighbors(i)) dense[i * n + nb.index] = nb.weight;
  }
  return dense;
}

// ---------------------------------------------------------------------------
// FeatureTensor

FeatureTensor::FeatureTensor(std::vector<NodeId> node_order, std::size_t features,
                             std::size_t steps)
    : FeatureTensor(node_order, features, steps,
                    std::vector<double>(node_order.size() * features * steps, 0.0)) {}

FeatureTensor::FeatureTensor(std::vector<NodeId> node_order, std::size_t features,
                             std::size_t steps, std::vector<double> values)
    : node_order_(std::move(node_order)),
      features_(features),
      steps_(steps),
      values_(std::move(values)) {
  if (values_.size() != node_order_.size() * features_ * steps_) {
    throw ValidationError("feature tensor payload has " +
                          std::to_string(values_.size()) + " values, expected " +
                          std::to_string(node_order_.size() * features_ * steps_));
  }
  for (std::size_t i = 0; i < node_order_.size(); ++i) {
    if (!index_.emplace(node_order_[i].value(), i).second) {
      throw ValidationError("feature tensor lists a node twice");
    }
  }
}

std::span<const double> FeatureTensor::node_values(std::size_t node) const {
  return {values_.data() + node * features_ * steps_, features_ * steps_};
}

std::span<double> FeatureTensor::node_values(std::size_t node) {
  return {values_.data() + node * features_ * steps_, features_ * steps_};
}

std::size_t FeatureTensor::row_of(NodeId id) const {
  auto it = index_.find(id.value());
  if (it == index_.end()) {
    throw LookupError("node " + std::to_string(id.value()) +
                      " has no feature row");
  }
  return it->second;
}

bool FeatureTensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

// ---------------------------------------------------------------------------
// DynamicGraphSequence

DynamicGraphSequence::DynamicGraphSequence(std::vector<IntervalData> intervals)
    : intervals_(std::move(intervals)) {
  for (std::size_t i = 0; i < intervals_.size(); ++i) {
    const IntervalData& d = intervals_[i];
    const std::string where = "interval " + std::to_string(d.graph.interval_index());
    if (i > 0 && d.graph.interval_index() <= intervals_[i - 1].graph.interval_index()) {
      throw ValidationError(where + ": interval indices must strictly increase");
    }
    if (d.features.node_count() != d.graph.size()) {
      throw ValidationError(where + ": feature rows (" +
                            std::to_string(d.features.node_count()) +
                            ") do not match node count (" +
                            std::to_string(d.graph.size()) + ")");
    }
    if (!std::equal(d.features.node_order().begin(), d.features.node_order().end(),
                    d.graph.nodes().begin())) {
      throw ValidationError(where + ": feature node order differs from graph order");
    }
    if (i > 0 && (d.features.features() != intervals_[0].features.features())) {
      throw ValidationError(where + ": feature dimension changes across intervals");
    }
    if (!d.features.all_finite()) {
      throw ValidationError(where + ": features contain NaN or infinite values");
    }
    if (i > 0 && set_intersection(intervals_[i - 1].graph.nodes(), d.graph.nodes()).empty()) {
      throw ValidationError(where + ": no nodes persist from the previous interval");
    }
  }
}

std::size_t DynamicGraphSequence::features() const {
  return intervals_.empty() ? 0 : intervals_.front().features.features();
}

std::size_t DynamicGraphSequence::steps() const {
  return intervals_.empty() ? 0 : intervals_.front().features.steps();
}

// ---------------------------------------------------------------------------
// Graph utilities

NodeChurn node_churn(const IntervalGraph& prev, const IntervalGraph& curr) {
  return {set_intersection(prev.nodes(), curr.nodes()),
          set_difference(curr.nodes(), prev.nodes()),
          set_difference(prev.nodes(), curr.nodes())};
}

std::vector<int> hop_distances(const IntervalGraph& g, NodeId v) {
  std::vector<int> dist(g.size(), -1);
  const std::size_t src = g.index_of(v);
  std::deque<std::size_t> queue{src};
  dist[src] = 0;
  while (!queue.empty()) {
    const std::size_t cur = queue.front();
    queue.pop_front();
    for (const Neighbor& nb : g.neighbors(cur)) {
      if (dist[nb.index] < 0) {
        dist[nb.index] = dist[cur] + 1;
        queue.push_back(nb.index);
      }
    }
  }
  return dist;
}

NodeSet k_hop_neighbors(const IntervalGraph& g, NodeId v, int k) {
  if (k <= 0) throw ArgumentError("k must be positive");
  const std::vector<int> dist = hop_distances(g, v);
  NodeSet out;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    if (dist[i] >= 1 && dist[i] <= k) out.push_back(g.node_at(i));
  }
  return out;
}

IntervalGraph induced_subgraph(const IntervalGraph& g, const NodeSet& keep) {
  if (!is_subset(keep, g.nodes())) {
    throw ArgumentError("induced_subgraph: keep set is not a subset of the graph");
  }
  std::vector<Edge> edges;
  for (const Edge& e : g.edges()) {
    if (std::binary_search(keep.begin(), keep.end(), e.u) &&
        std::binary_search(keep.begin(), keep.end(), e.v)) {
      edges.push_back(e);
    }
  }
  return IntervalGraph(g.interval_index(), keep, std::move(edges));
}

FeatureTensor crop_features(const FeatureTensor& x, const NodeSet& keep) {
  FeatureTensor out(keep, x.features(), x.steps());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    auto src = x.node_values(x.row_of(keep[i]));
    std::copy(src.begin(), src.end(), out.node_values(i).begin());
  }
  return out;
}

}  // namespace infgnn
