#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "infgnn/distrib.hpp"
#include "infgnn/graph.hpp"

namespace infgnn {

inline constexpr double kRiDenominatorFloor = 1e-8;

// Divergence between two nodes' raw value samples. Defaults to `sample_jsd`
// with 64 bins; replaceable so tests can rescale every JSD uniformly.
using SampleDivergence = std::function<double(std::span<const double>, std::span<const double>)>;

SampleDivergence default_divergence();

// Relation Importance per persisting node for one interval transition.
struct RiScoreTable {
  int prev_interval = 0;
  int curr_interval = 0;
  int k = 1;
  std::vector<std::pair<NodeId, double>> scores;  // ascending NodeId

  NodeSet domain() const;
  double score(NodeId v) const;
};

// Σ_{u∈N(v)} JSD(u_t‖u_{t-1})·JSD(v_t‖v_{t-1}) / (JSD(u_t‖v_t)·JSD(u_{t-1}‖v_{t-1})).
// N(v) is the k-hop neighbourhood in g_curr restricted to persisting nodes.
// Each denominator factor is floored at 1e-8. A node without persisting
// neighbours scores the largest finite double so it ranks last.
double relation_importance(NodeId v, const IntervalGraph& g_prev, const IntervalGraph& g_curr,
                           const FeatureTensor& x_prev, const FeatureTensor& x_curr, int k,
                           const SampleDivergence& divergence = default_divergence());

RiScoreTable score_relation_importance(const IntervalGraph& g_prev, const IntervalGraph& g_curr,
                                       const FeatureTensor& x_prev, const FeatureTensor& x_curr,
                                       int k,
                                       const SampleDivergence& divergence = default_divergence());

struct SelectedSubgraph {
  NodeSet nodes;
  IntervalGraph graph;  // induced in g_curr, edges restricted to E_t ∩ E_{t-1}
};

// max(1, ⌊fraction·N_t⌋), capped at the number of persisting nodes.
std::size_t informative_count(double fraction, std::size_t curr_node_count,
                              std::size_t persisting_count);

// Lowest-RI nodes, ties by ascending NodeId.
SelectedSubgraph select_informative_subgraph(const RiScoreTable& table, const IntervalGraph& g_prev,
                                             const IntervalGraph& g_curr, double fraction);

// Same cardinality as the informative selection, drawn uniformly from the
// persisting nodes.
SelectedSubgraph select_random_subgraph(const RiScoreTable& table, const IntervalGraph& g_prev,
                                        const IntervalGraph& g_curr, double fraction,
                                        std::mt19937_64& rng);

// Subgraph of g_curr on `nodes` keeping only edges present in both intervals.
IntervalGraph persisting_subgraph(const IntervalGraph& g_prev, const IntervalGraph& g_curr,
                                  const NodeSet& nodes);

struct MergedSubgraph {
  IntervalGraph graph;       // base subgraph plus new nodes and their E_t edges into the base
  FeatureTensor features;    // base rows (recorded) plus new rows (simulated)
  FeatureTensor simulated;   // the new rows only
};

// Simulates each new node as the per-(feature, step) mean over its k-hop
// neighbours that lie in the base set, falling back to the mean over the
// whole base set when it has none.
MergedSubgraph neighbors_merge(const NodeSet& new_nodes, const IntervalGraph& g_curr,
                               const SelectedSubgraph& base, const FeatureTensor& x_curr, int k);

void write_ri_scores(const RiScoreTable& table, const std::filesystem::path& file);

}  // namespace infgnn
