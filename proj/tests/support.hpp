#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

#include "infgnn/graph.hpp"
#include "infgnn/model.hpp"

namespace testing {

using namespace infgnn;

inline NodeSet ids(std::initializer_list<std::uint32_t> v) {
  std::vector<NodeId> out;
  for (auto x : v) out.emplace_back(x);
  return make_node_set(out);
}

inline NodeSet range_ids(std::uint32_t first, std::uint32_t count) {
  NodeSet out;
  for (std::uint32_t i = 0; i < count; ++i) out.emplace_back(first + i);
  return out;
}

// Erdos-Renyi graph on the given nodes.
inline IntervalGraph random_graph(int interval, const NodeSet& nodes, double p,
                                  std::mt19937_64& rng) {
  std::bernoulli_distribution edge(p);
  std::vector<Edge> edges;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    for (std::size_t j = i + 1; j < nodes.size(); ++j) {
      if (edge(rng)) edges.push_back({nodes[i], nodes[j], 1.0});
    }
  }
  return IntervalGraph(interval, nodes, edges);
}

inline FeatureTensor random_features(const NodeSet& nodes, std::size_t d, std::size_t steps,
                                     std::mt19937_64& rng, double lo = 0.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  FeatureTensor x(nodes, d, steps);
  for (std::size_t r = 0; r < nodes.size(); ++r) {
    for (double& v : x.node_values(r)) v = u(rng);
  }
  return x;
}

inline std::filesystem::path temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  auto dir = std::filesystem::temp_directory_path() /
             ("infgnn_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
              std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Random sample on `a` with standard-normal inputs and targets.
inline Sample random_sample(const ModelConfig& c, std::shared_ptr<const Adjacency> a,
                            std::uint64_t id, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Sample s;
  s.timestamp_id = id;
  s.graph = a;
  s.nodes = a->size();
  s.input.resize(s.nodes * c.features * c.input_steps);
  s.target.resize(s.nodes * c.features * c.horizon);
  for (double& v : s.input) v = g(rng);
  for (double& v : s.target) v = g(rng);
  return s;
}

inline std::shared_ptr<const Adjacency> random_adjacency(std::size_t n, double p,
                                                         std::mt19937_64& rng,
                                                         AdjacencyMode mode = AdjacencyMode::symmetric) {
  std::uniform_real_distribution<double> w(0.5, 2.0);
  std::bernoulli_distribution edge(p);
  std::vector<double> dense(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (edge(rng)) dense[i * n + j] = dense[j * n + i] = w(rng);
    }
  }
  return std::make_shared<const Adjacency>(normalize_adjacency(dense, n, mode));
}

// Gaussian-perturbed parameters so every ReLU unit is exercised.
inline void randomize_params(ModelState& s, std::mt19937_64& rng, double scale = 0.5) {
  std::normal_distribution<double> g(0.0, scale);
  for (double& p : s.params) p = g(rng);
}

}  // namespace testing
