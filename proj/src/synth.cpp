#include "infgnn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>

#include <json.hpp>

#include "infgnn/errors.hpp"

namespace infgnn {
namespace {

struct NodeProcess {
  NodeId id;
  double x = 0.0, y = 0.0;  // layout position used for wiring
  bool stable = false;
  std::vector<double> level, amp1, amp2, phase1, phase2;  // per feature
  std::vector<double> ar_state;                           // per feature
  double shift_sign = 0.0;  // direction of the last mean shift, 0 before the first
  bool widened = false;     // direction of the last variance change
};

constexpr double kNoiseFraction = 0.05;
constexpr double kArCoefficient = 0.7;

void validate(const SynthConfig& c) {
  auto fail = [](const std::string& m) { throw ConfigError("synthetic config: " + m); };
  if (c.intervals < 1) fail("intervals must be >= 1");
  if (c.initial_nodes < 1) fail("initial_nodes must be >= 1");
  if (c.growth < 0 || c.removals < 0) fail("growth/removals must be >= 0");
  if (c.steps < 1 || c.features < 1 || c.period < 1) fail("steps/features/period must be >= 1");
  if (c.drift_strength < 0.0) fail("drift_strength must be >= 0");
  if (c.stable_fraction < 0.0 || c.stable_fraction > 1.0) fail("stable_fraction must be in [0,1]");
  if (c.attach_degree < 1) fail("attach_degree must be >= 1");
}

// Edges from each node in `from` to its `degree` nearest nodes in `pool`
// (ties by id). Undirected duplicates are merged by the graph constructor.
void wire_nearest(const std::vector<NodeProcess>& nodes, const std::vector<std::size_t>& from,
                  const std::vector<std::size_t>& pool, int degree, std::vector<Edge>& edges) {
  for (std::size_t a : from) {
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t b : pool) {
      if (b == a) continue;
      const double dx = nodes[a].x - nodes[b].x, dy = nodes[a].y - nodes[b].y;
      cand.emplace_back(dx * dx + dy * dy, b);
    }
    const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(degree), cand.size());
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end(),
                      [&](const auto& l, const auto& r) {
                        return l.first != r.first ? l.first < r.first
                                                  : nodes[l.second].id < nodes[r.second].id;
                      });
    for (std::size_t i = 0; i < take; ++i) {
      edges.push_back({nodes[a].id, nodes[cand[i].second].id, 1.0});
    }
  }
}

}  // namespace

SyntheticDataset generate_synthetic_drift(const SynthConfig& config, std::uint64_t seed) {
  validate(config);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const auto nf = static_cast<std::size_t>(config.features);
  const double two_pi = 2.0 * std::numbers::pi;

  std::vector<NodeProcess> nodes;
  auto fresh_process = [&](NodeProcess& p) {
    for (std::size_t f = 0; f < nf; ++f) {
      p.level.push_back(80.0 + 220.0 * unit(rng));
      p.amp1.push_back(0.2 + 0.3 * unit(rng));
      p.amp2.push_back(0.05 + 0.15 * unit(rng));
      p.phase1.push_back(two_pi * unit(rng));
      p.phase2.push_back(two_pi * unit(rng));
      p.ar_state.push_back(0.0);
    }
  };
  auto flag_stable = [&](std::size_t first, std::size_t count) {
    const auto want = static_cast<std::size_t>(
        std::lround(config.stable_fraction * static_cast<double>(count)));
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = first + i;
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < want; ++i) nodes[order[i]].stable = true;
  };

  for (int i = 0; i < config.initial_nodes; ++i) {
    NodeProcess p;
    p.id = NodeId(static_cast<std::uint32_t>(i));
    p.x = unit(rng);
    p.y = unit(rng);
    fresh_process(p);
    nodes.push_back(std::move(p));
  }
  flag_stable(0, nodes.size());

  std::vector<std::size_t> alive(nodes.size());
  for (std::size_t i = 0; i < alive.size(); ++i) alive[i] = i;
  std::vector<Edge> edges;
  wire_nearest(nodes, alive, alive, config.attach_degree, edges);

  SyntheticDataset out;
  std::vector<IntervalData> intervals;
  for (int t = 1; t <= config.intervals; ++t) {
    if (t > 1) {
      if (static_cast<std::size_t>(config.removals) >= alive.size()) {
        throw ConfigError("synthetic config: removals leave no persisting nodes");
      }
      // drop random nodes together with their edges
      for (int r = 0; r < config.removals; ++r) {
        std::uniform_int_distribution<std::size_t> pick(0, alive.size() - 1);
        alive.erase(alive.begin() + static_cast<std::ptrdiff_t>(pick(rng)));
      }
      std::erase_if(edges, [&](const Edge& e) {
        auto gone = [&](NodeId id) {
          return std::none_of(alive.begin(), alive.end(),
                              [&](std::size_t a) { return nodes[a].id == id; });
        };
        return gone(e.u) || gone(e.v);
      });

      const std::vector<std::size_t> existing = alive;
      const std::size_t first_new = nodes.size();
      std::vector<std::size_t> added;
      for (int g = 0; g < config.growth; ++g) {
        std::uniform_int_distribution<std::size_t> pick(0, existing.size() - 1);
        const NodeProcess& anchor = nodes[existing[pick(rng)]];
        NodeProcess p;
        p.id = NodeId(static_cast<std::uint32_t>(nodes.size()));
        p.x = anchor.x + 0.05 * gauss(rng);
        p.y = anchor.y + 0.05 * gauss(rng);
        nodes.push_back(std::move(p));
        added.push_back(nodes.size() - 1);
      }
      wire_nearest(nodes, added, existing, config.attach_degree, edges);
      // New sensors resemble the road segments they attach to.
      for (std::size_t a : added) {
        NodeProcess& p = nodes[a];
        std::vector<std::size_t> nbrs;
        for (const Edge& e : edges) {
          if (e.u == p.id) nbrs.push_back(e.v.value());
          if (e.v == p.id) nbrs.push_back(e.u.value());
        }
        const NodeProcess& ref = nodes[nbrs.front()];
        for (std::size_t f = 0; f < nf; ++f) {
          double level = 0.0;
          for (std::size_t b : nbrs) level += nodes[b].level[f];
          level /= static_cast<double>(nbrs.size());
          p.level.push_back(level * (0.9 + 0.2 * unit(rng)));
          p.amp1.push_back(ref.amp1[f] * (0.9 + 0.2 * unit(rng)));
          p.amp2.push_back(ref.amp2[f] * (0.9 + 0.2 * unit(rng)));
          p.phase1.push_back(ref.phase1[f] + 0.2 * gauss(rng));
          p.phase2.push_back(ref.phase2[f] + 0.2 * gauss(rng));
          p.ar_state.push_back(0.0);
        }
      }
      flag_stable(first_new, added.size());
      alive.insert(alive.end(), added.begin(), added.end());
    }

    std::sort(alive.begin(), alive.end());
    std::vector<NodeId> ids;
    for (std::size_t a : alive) ids.push_back(nodes[a].id);
    IntervalGraph graph(t, ids, edges);
    FeatureTensor x(graph.nodes(), nf, static_cast<std::size_t>(config.steps));

    for (std::size_t row = 0; row < alive.size(); ++row) {
      NodeProcess& p = nodes[alive[row]];
      double shift = 0.0, scale = 1.0;
      if (!p.stable && config.drift_strength > 0.0) {
        // Directions alternate between consecutive intervals so every
        // transition of an unstable node moves its distribution.
        if (p.shift_sign == 0.0) {
          p.shift_sign = unit(rng) < 0.5 ? -1.0 : 1.0;
          p.widened = unit(rng) < 0.5;
        } else {
          p.shift_sign = -p.shift_sign;
          p.widened = !p.widened;
        }
        shift = p.shift_sign * config.drift_strength * (0.3 + 0.3 * unit(rng));
        const double grow = 1.0 + config.drift_strength * (0.3 + 0.5 * unit(rng));
        scale = p.widened ? grow : 1.0 / grow;
        out.drift_log.push_back({p.id, t, shift, scale});
      }
      for (std::size_t f = 0; f < nf; ++f) {
        const double level = p.level[f];
        for (int s = 0; s < config.steps; ++s) {
          const double phase = two_pi * static_cast<double>(s) / config.period;
          p.ar_state[f] = kArCoefficient * p.ar_state[f] +
                          kNoiseFraction * level * gauss(rng);
          const double fluctuation =
              level * (p.amp1[f] * std::sin(phase + p.phase1[f]) +
                       p.amp2[f] * std::sin(2.0 * phase + p.phase2[f])) +
              p.ar_state[f];
          x.at(row, f, static_cast<std::size_t>(s)) =
              level * (1.0 + shift) + scale * fluctuation;
        }
      }
    }
    intervals.push_back({std::move(graph), std::move(x)});
  }

  std::vector<NodeId> stable;
  for (const NodeProcess& p : nodes) {
    if (p.stable) stable.push_back(p.id);
  }
  out.stable = make_node_set(std::move(stable));
  out.sequence = DynamicGraphSequence(std::move(intervals));
  return out;
}

void write_ground_truth(const SyntheticDataset& data, const std::filesystem::path& file) {
  nlohmann::json drift = nlohmann::json::array();
  for (const NodeDrift& d : data.drift_log) {
    drift.push_back({{"node", d.node.value()},
                     {"interval", d.interval},
                     {"mean_shift", d.mean_shift},
                     {"scale", d.scale}});
  }
  std::vector<std::uint32_t> stable;
  for (NodeId id : data.stable) stable.push_back(id.value());
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << nlohmann::json{{"stable_nodes", stable}, {"drift", drift}}.dump(2) << "\n";
}

}  // namespace infgnn
