#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "infgnn/graph.hpp"

namespace infgnn {

struct SynthConfig {
  int intervals = 4;
  int initial_nodes = 60;
  int growth = 10;              // new nodes per interval after the first
  int removals = 0;             // nodes dropped per interval after the first
  int steps = 2016;             // timestamps per interval (one week of 5-min data)
  int features = 1;
  int period = 288;             // daily cycle in steps
  double drift_strength = 1.0;  // 0 = stationary, 1 = "high"
  double stable_fraction = 0.1;
  int attach_degree = 2;        // edges per node to its nearest neighbours
};

struct NodeDrift {
  NodeId node;
  int interval;
  double mean_shift;  // in units of the node's level
  double scale;       // multiplicative factor on the fluctuation around the level
};

struct SyntheticDataset {
  DynamicGraphSequence sequence;
  NodeSet stable;  // generator ground truth
  std::vector<NodeDrift> drift_log;
};

// Deterministic in (config, seed). Throws ConfigError for configurations
// that cannot satisfy the sequence invariants.
SyntheticDataset generate_synthetic_drift(const SynthConfig& config, std::uint64_t seed);

void write_ground_truth(const SyntheticDataset& data, const std::filesystem::path& file);

}  // namespace infgnn
