#include "infgnn/ri.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "infgnn/errors.hpp"

namespace infgnn {

SampleDivergence default_divergence() {
  return [](std::span<const double> a, std::span<const double> b) {
    return sample_jsd(a, b, kDefaultBins);
  };
}

NodeSet RiScoreTable::domain() const {
  NodeSet out;
  for (const auto& [id, s] : scores) out.push_back(id);
  return out;
}

double RiScoreTable::score(NodeId v) const {
  auto it = std::lower_bound(scores.begin(), scores.end(), v,
                             [](const auto& e, NodeId id) { return e.first < id; });
  if (it == scores.end() || it->first != v) {
    throw LookupError("no RI score for node " + std::to_string(v.value()));
  }
  return it->second;
}

namespace {

struct RiContext {
  const IntervalGraph& restricted;  // g_curr induced on persisting nodes
  const FeatureTensor& x_prev;
  const FeatureTensor& x_curr;
  const SampleDivergence& divergence;
  int k;
};

double ri_with_context(NodeId v, const RiContext& ctx, std::vector<double>* temporal_cache) {
  auto temporal = [&](NodeId id) {
    const std::size_t idx = ctx.restricted.index_of(id);
    if (temporal_cache && !std::isnan((*temporal_cache)[idx])) return (*temporal_cache)[idx];
    const double d = ctx.divergence(ctx.x_curr.node_values(ctx.x_curr.row_of(id)),
                                    ctx.x_prev.node_values(ctx.x_prev.row_of(id)));
    if (temporal_cache) (*temporal_cache)[idx] = d;
    return d;
  };
  const NodeSet nbrs = k_hop_neighbors(ctx.restricted, v, ctx.k);
  if (nbrs.empty()) return std::numeric_limits<double>::max();

  const double v_temporal = temporal(v);
  const auto v_curr = ctx.x_curr.node_values(ctx.x_curr.row_of(v));
  const auto v_prev = ctx.x_prev.node_values(ctx.x_prev.row_of(v));
  double sum = 0.0;
  for (NodeId u : nbrs) {
    const double numer = temporal(u) * v_temporal;
    const double spatial_curr =
        std::max(ctx.divergence(ctx.x_curr.node_values(ctx.x_curr.row_of(u)), v_curr),
                 kRiDenominatorFloor);
    const double spatial_prev =
        std::max(ctx.divergence(ctx.x_prev.node_values(ctx.x_prev.row_of(u)), v_prev),
                 kRiDenominatorFloor);
    sum += numer / (spatial_curr * spatial_prev);
  }
  if (!std::isfinite(sum)) return std::numeric_limits<double>::max();
  return sum;
}

}  // namespace

double relation_importance(NodeId v, const IntervalGraph& g_prev, const IntervalGraph& g_curr,
                           const FeatureTensor& x_prev, const FeatureTensor& x_curr, int k,
                           const SampleDivergence& divergence) {
  const NodeSet persisting = set_intersection(g_prev.nodes(), g_curr.nodes());
  if (!std::binary_search(persisting.begin(), persisting.end(), v)) {
    throw ArgumentError("relation_importance: node " + std::to_string(v.value()) +
                        " does not persist across the interval pair");
  }
  const IntervalGraph restricted = induced_subgraph(g_curr, persisting);
  return ri_with_context(v, {restricted, x_prev, x_curr, divergence, k}, nullptr);
}

RiScoreTable score_relation_importance(const IntervalGraph& g_prev, const IntervalGraph& g_curr,
                                       const FeatureTensor& x_prev, const FeatureTensor& x_curr,
                                       int k, const SampleDivergence& divergence) {
  const NodeSet persisting = set_intersection(g_prev.nodes(), g_curr.nodes());
  const IntervalGraph restricted = induced_subgraph(g_curr, persisting);
  std::vector<double> cache(persisting.size(), std::nan(""));
  const RiContext ctx{restricted, x_prev, x_curr, divergence, k};
  RiScoreTable table{g_prev.interval_index(), g_curr.interval_index(), k, {}};
  for (NodeId v : persisting) table.scores.emplace_back(v, ri_with_context(v, ctx, &cache));
  return table;
}

std::size_t informative_count(double fraction, std::size_t curr_node_count,
                              std::size_t persisting_count) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ArgumentError("subgraph fraction must lie in (0, 1]");
  }
  const auto n = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(curr_node_count)));
  return std::min(std::max<std::size_t>(1, n), persisting_count);
}

IntervalGraph persisting_subgraph(const IntervalGraph& g_prev, const IntervalGraph& g_curr,
                                  const NodeSet& nodes) {
  std::vector<Edge> edges;
  const IntervalGraph induced = induced_subgraph(g_curr, nodes);
  for (const Edge& e : induced.edges()) {
    if (g_prev.has_edge(e.u, e.v)) edges.push_back(e);
  }
  return IntervalGraph(g_curr.interval_index(), nodes, std::move(edges));
}

SelectedSubgraph select_informative_subgraph(const RiScoreTable& table, const IntervalGraph& g_prev,
                                             const IntervalGraph& g_curr, double fraction) {
  if (table.scores.empty()) throw ArgumentError("select_informative_subgraph: empty RI table");
  auto ranked = table.scores;
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  const std::size_t n = informative_count(fraction, g_curr.size(), ranked.size());
  std::vector<NodeId> chosen;
  for (std::size_t i = 0; i < n; ++i) chosen.push_back(ranked[i].first);
  NodeSet nodes = make_node_set(std::move(chosen));
  IntervalGraph graph = persisting_subgraph(g_prev, g_curr, nodes);
  return {std::move(nodes), std::move(graph)};
}

SelectedSubgraph select_random_subgraph(const RiScoreTable& table, const IntervalGraph& g_prev,
                                        const IntervalGraph& g_curr, double fraction,
                                        std::mt19937_64& rng) {
  if (table.scores.empty()) throw ArgumentError("select_random_subgraph: empty RI table");
  NodeSet pool = table.domain();
  const std::size_t n = informative_count(fraction, g_curr.size(), pool.size());
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(n);
  NodeSet nodes = make_node_set(std::move(pool));
  IntervalGraph graph = persisting_subgraph(g_prev, g_curr, nodes);
  return {std::move(nodes), std::move(graph)};
}

MergedSubgraph neighbors_merge(const NodeSet& new_nodes, const IntervalGraph& g_curr,
                               const SelectedSubgraph& base, const FeatureTensor& x_curr, int k) {
  const std::size_t nf = x_curr.features();
  const std::size_t steps = x_curr.steps();
  const std::size_t width = nf * steps;
  FeatureTensor simulated(new_nodes, nf, steps);

  std::vector<double> base_mean(width, 0.0);
  for (NodeId b : base.nodes) {
    const auto vals = x_curr.node_values(x_curr.row_of(b));
    for (std::size_t i = 0; i < width; ++i) base_mean[i] += vals[i];
  }
  for (double& m : base_mean) m /= static_cast<double>(std::max<std::size_t>(1, base.nodes.size()));

  std::vector<Edge> edges = base.graph.edges();
  for (std::size_t r = 0; r < new_nodes.size(); ++r) {
    const NodeId v = new_nodes[r];
    const NodeSet contributors = set_intersection(k_hop_neighbors(g_curr, v, k), base.nodes);
    auto out = simulated.node_values(r);
    if (contributors.empty()) {
      std::copy(base_mean.begin(), base_mean.end(), out.begin());
    } else {
      std::fill(out.begin(), out.end(), 0.0);
      for (NodeId u : contributors) {
        const auto vals = x_curr.node_values(x_curr.row_of(u));
        for (std::size_t i = 0; i < width; ++i) out[i] += vals[i];
      }
      for (double& o : out) o /= static_cast<double>(contributors.size());
    }
    for (const Neighbor& nb : g_curr.neighbors(g_curr.index_of(v))) {
      const NodeId u = g_curr.node_at(nb.index);
      if (std::binary_search(base.nodes.begin(), base.nodes.end(), u)) {
        edges.push_back({v, u, nb.weight});
      }
    }
  }

  NodeSet all = base.nodes;
  all.insert(all.end(), new_nodes.begin(), new_nodes.end());
  all = make_node_set(std::move(all));
  IntervalGraph graph(g_curr.interval_index(), all, std::move(edges));
  FeatureTensor features(all, nf, steps);
  for (std::size_t i = 0; i < all.size(); ++i) {
    const NodeId id = all[i];
    const bool is_new = std::binary_search(new_nodes.begin(), new_nodes.end(), id);
    const auto src = is_new ? simulated.node_values(simulated.row_of(id))
                            : x_curr.node_values(x_curr.row_of(id));
    std::copy(src.begin(), src.end(), features.node_values(i).begin());
  }
  return {std::move(graph), std::move(features), std::move(simulated)};
}

void write_ri_scores(const RiScoreTable& table, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.precision(17);
  out << "node,score\n";
  for (const auto& [id, s] : table.scores) out << id.value() << ',' << s << '\n';
}

}  // namespace infgnn
