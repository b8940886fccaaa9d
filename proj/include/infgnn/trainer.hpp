#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "infgnn/graph.hpp"
#include "infgnn/influence.hpp"
#include "infgnn/model.hpp"
#include "infgnn/ri.hpp"

namespace infgnn {

enum class HessianSetting { diagonal, exact };

// Defaults: M = K = 12, lr 0.01, 50 epochs with
// 45 pseudo-update epochs, batch 128, 10% subgraph, buffer of 1000,
// simulated test sets of 100, equal 0.5 smoothing weights.
struct TrainConfig {
  std::size_t input_steps = 12;  // M
  std::size_t horizon = 12;      // K
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 64;
  std::size_t conv_width = 3;
  AdjacencyMode adjacency = AdjacencyMode::symmetric;

  int epochs = 50;         // I
  int pseudo_epochs = 45;  // N
  std::size_t batch_size = 128;
  double lr = 0.01;

  std::size_t buffer_capacity = 1000;
  double memory_fraction = 0.25;  // share of each batch drawn from the buffer
  std::size_t sim_set_size = 100;
  HessianSetting hessian = HessianSetting::diagonal;
  double damping = 1e-3;
  std::size_t exact_parameter_cap = 2000;
  BufferRanking ranking = BufferRanking::signed_descending;

  double subgraph_fraction = 0.10;
  int k_hop = 1;

  double lambda_ewc = 0.5;
  double lambda_ris = 0.5;
  std::size_t fisher_samples = 256;
  bool fisher_full_graph = false;  // literal X^{V_{t-1}} reading of the Fisher pool
  std::size_t ri_block_windows = 24;
  std::size_t ri_blocks = 8;

  double train_fraction = 0.6;
  double test_fraction = 0.2;
  double mape_floor = 1.0;

  std::uint64_t seed = 0;
  std::string model_tag = "inf-gnn";

  bool use_subgraph = true;
  bool informative_subgraph = true;
  bool use_buffer = true;
  bool informative_buffer = true;
  bool use_ris = true;
  bool use_ewc = true;

  ModelConfig model_config(std::size_t features) const;
  // Throws ConfigError on violated invariants.
  void validate() const;
};

// Independent seed per (run seed, interval, purpose) so arms that differ in
// one component still share every other random stream.
std::uint64_t stream_seed(std::uint64_t seed, int interval, std::string_view purpose);

// Per-feature z-score from the training split of one interval.
struct Normalizer {
  std::vector<double> mean;
  std::vector<double> scale;

  static Normalizer fit(const FeatureTensor& x, std::size_t step_end);
  FeatureTensor apply(const FeatureTensor& x) const;
  double invert(double value, std::size_t feature) const {
    return value * scale[feature] + mean[feature];
  }
};

inline std::uint64_t make_timestamp_id(int interval, std::size_t anchor) {
  return (static_cast<std::uint64_t>(interval) << 32) | static_cast<std::uint64_t>(anchor);
}

struct WindowRange {
  std::size_t first = 0;  // first anchor
  std::size_t last = 0;   // one past the last anchor
};

// Anchors whose input and target both lie in the first `train_fraction` of
// the interval, and anchors whose input starts in the last `test_fraction`.
WindowRange train_windows(std::size_t steps, const TrainConfig& cfg);
WindowRange test_windows(std::size_t steps, const TrainConfig& cfg);

// Window anchored at s: input steps [s, s+M), target [s+M, s+M+K).
std::vector<Sample> make_windows(const FeatureTensor& normalized,
                                 std::shared_ptr<const Adjacency> graph, std::size_t input_steps,
                                 std::size_t horizon, WindowRange range, int interval,
                                 std::size_t stride = 1);

struct FisherTable {
  std::vector<double> loss;  // F_i
  std::vector<double> ri;    // F_i^RIS
  std::vector<double> anchor;
  bool anchored() const { return !anchor.empty(); }
};

// Mean over samples of the squared per-sample loss gradient.
std::vector<double> fisher_information(const ModelState& state, std::span<const Sample> data);

// λ Σ_i weight_i (θ_i - anchor_i)².
double quadratic_penalty(std::span<const double> params, std::span<const double> weight,
                         std::span<const double> anchor, double lambda);
void add_quadratic_penalty_gradient(std::span<const double> params,
                                    std::span<const double> weight,
                                    std::span<const double> anchor, double lambda,
                                    std::span<double> grad);

double ewc_penalty(const ModelState& state, const FisherTable& table, double lambda_ewc);
double ris_penalty(const ModelState& state, const FisherTable& table, double lambda_ris);

// Interval-level inputs for the RI-based Fisher.
struct RiFisherInput {
  const IntervalGraph* graph_prev;
  const IntervalGraph* graph_curr;
  const FeatureTensor* x_prev;  // normalized
  const FeatureTensor* x_curr;  // normalized
  NodeSet subgraph;
};

// Differentiable mean subgraph RI of the model's predictions for one block of
// stride-K windows, plus its parameter gradient.
struct RiBlockValue {
  double value = 0.0;
  std::vector<double> gradient;
};
RiBlockValue soft_ri_block(const ModelState& state, const RiFisherInput& in, std::size_t first_tile,
                           std::size_t tiles, int k_hop);
double soft_ri_block_value(const ModelState& state, const RiFisherInput& in,
                           std::size_t first_tile, std::size_t tiles, int k_hop);
std::size_t ri_tile_count(const ModelState& state, std::size_t steps);

// Mean over blocks of the squared gradient of the block RI scalar.
std::vector<double> ri_fisher(const ModelState& state, const RiFisherInput& in,
                              const TrainConfig& cfg);

// L + L_ewc + L_RIS; disabled or zero-weight terms contribute exactly 0.
double total_loss(double base, const ModelState& state, const FisherTable& fisher,
                  const TrainConfig& cfg);

struct BufferHistoryRow {
  int interval;
  int epoch;
  std::uint64_t timestamp_id;
  double score;
};

struct IntervalLog {
  int interval = 0;
  std::optional<RiScoreTable> ri;
  NodeSet selected;
  NodeSet simulated;
  std::size_t train_nodes = 0;
  std::size_t train_windows = 0;
  std::size_t optimizer_steps = 0;
  std::size_t influence_calls = 0;
  std::vector<double> epoch_losses;
  std::vector<std::uint64_t> window_order;  // every window id in consumption order
  std::vector<BufferHistoryRow> buffer_history;
  std::vector<double> gammas;
  double final_loss = 0.0;
};

struct IntervalOutcome {
  ModelState state;
  MemoryBuffer buffer;
  FisherTable fisher;
  Normalizer normalizer;
  IntervalLog log;
};

// One pass of the training procedure over interval `curr` (prev is null for
// the first interval): RI scoring, subgraph selection, neighbours merging,
// then epochs of pseudo update followed by influence-driven buffer
// replacement, each step minimizing L + L_ewc + L_RIS.
IntervalOutcome train_interval(ModelState state, const IntervalData* prev,
                               const IntervalData& curr, MemoryBuffer buffer, FisherTable fisher,
                               const TrainConfig& cfg);

}  // namespace infgnn
