#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "infgnn/graph.hpp"

namespace infgnn {

enum class AdjacencyMode { symmetric, raw };

// GNN -> depthwise temporal conv -> GNN -> dense M->K head.
struct ModelConfig {
  std::size_t features = 1;      // D
  std::size_t input_steps = 12;  // M
  std::size_t horizon = 12;      // K
  std::size_t hidden1 = 64;
  std::size_t hidden2 = 64;
  std::size_t conv_width = 3;    // odd, same padding
  AdjacencyMode adjacency = AdjacencyMode::symmetric;

  bool operator==(const ModelConfig&) const = default;
};

// Offsets of each parameter block inside the flat parameter vector.
struct ParamLayout {
  explicit ParamLayout(const ModelConfig& c);

  std::size_t gnn1_neighbor, gnn1_self;  // D x h1 each
  std::size_t conv_kernel, conv_bias;    // width x h1, h1
  std::size_t gnn2_neighbor, gnn2_self;  // h1 x h2 each
  std::size_t head_weight, head_bias;    // (M*h2) x (D*K), D*K
  std::size_t total;
};

std::size_t parameter_count(const ModelConfig& c);

struct ModelState {
  ModelConfig config;
  std::vector<double> params;
  std::vector<double> moment1;
  std::vector<double> moment2;
  std::uint64_t step = 0;
};

// Glorot-uniform weights, zero biases, zero optimizer moments.
ModelState init_model(const ModelConfig& config, std::uint64_t seed);

// Sparse row operator applied to node embeddings.
class Adjacency {
 public:
  struct Entry {
    std::size_t col;
    double weight;
  };

  Adjacency() = default;
  Adjacency(std::size_t n, std::vector<std::size_t> row_start, std::vector<Entry> entries);

  std::size_t size() const { return n_; }
  std::span<const Entry> row(std::size_t i) const {
    return {entries_.data() + row_start_[i], row_start_[i + 1] - row_start_[i]};
  }
  std::vector<double> dense() const;

 private:
  std::size_t n_ = 0;
  std::vector<std::size_t> row_start_{0};
  std::vector<Entry> entries_;
};

// D^{-1/2} A D^{-1/2} (zero-degree rows stay zero) or A unchanged in raw
// mode. `dense` is row-major n x n; negative entries throw ArgumentError.
Adjacency normalize_adjacency(std::span<const double> dense, std::size_t n,
                              AdjacencyMode mode = AdjacencyMode::symmetric);
Adjacency normalize_adjacency(const IntervalGraph& g,
                              AdjacencyMode mode = AdjacencyMode::symmetric);

// One sliding-window training example over a fixed node set.
struct Sample {
  std::uint64_t timestamp_id = 0;
  std::shared_ptr<const Adjacency> graph;
  std::size_t nodes = 0;
  std::vector<double> input;   // nodes x D x M
  std::vector<double> target;  // nodes x D x K
};

using Batch = std::vector<Sample>;

// Throws ArgumentError on shape disagreement or duplicate timestamp ids.
void validate_batch(const ModelConfig& c, std::span<const Sample> batch);

// nodes x D x K prediction.
std::vector<double> forward(const ModelState& state, const Adjacency& a,
                            std::span<const double> input);

struct LossGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // aligned with ModelState::params
};

// Mean squared error pooled over every (sample, node, feature, step) entry,
// with exact reverse-mode gradients.
LossGradient loss_and_gradients(const ModelState& state, std::span<const Sample> batch);

// MSE of one sample on its own entries.
LossGradient sample_loss_gradient(const ModelState& state, const Sample& sample);

double batch_loss(const ModelState& state, std::span<const Sample> batch);

// Pullback of an arbitrary output cotangent (nodes x D x K) to parameters,
// accumulated into `grad`.
void accumulate_output_vjp(const ModelState& state, const Adjacency& a,
                           std::span<const double> input, std::span<const double> d_output,
                           std::span<double> grad);

// Exact Hessian of the pooled MSE (forward-over-reverse), row-major P x P.
std::vector<double> loss_hessian(const ModelState& state, std::span<const Sample> batch);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Bias-corrected adaptive-moment step. Throws NumericalError (state left
// untouched) when the gradient holds a non-finite value.
void optimizer_step(ModelState& state, std::span<const double> grads, double lr,
                    const AdamOptions& options = {});

std::string to_string(AdjacencyMode mode);
AdjacencyMode adjacency_mode_from_string(const std::string& s);

}  // namespace infgnn
