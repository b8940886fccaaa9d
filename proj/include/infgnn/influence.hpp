#pragma once

#include <concepts>
#include <cstddef>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "infgnn/errors.hpp"
#include "infgnn/model.hpp"

namespace infgnn {

enum class HessianMode { exact, diagonal };

// How "higher influence" is read when ranking buffer candidates.
enum class BufferRanking { signed_descending, magnitude };

struct InfluenceOptions {
  HessianMode mode = HessianMode::exact;
  double damping = 1e-3;
  std::size_t exact_parameter_cap = 2000;
};

// A loss over samples that exposes what an influence estimate needs. The
// pooled loss over a set S is Σ w_s L_s / Σ w_s.
template <class O>
concept InfluenceObjective = requires(const O& o, const typename O::sample_type& s,
                                      std::span<const typename O::sample_type> set) {
  { o.parameter_count() } -> std::convertible_to<std::size_t>;
  { o.sample_gradient(s) } -> std::same_as<Eigen::VectorXd>;
  { o.sample_weight(s) } -> std::convertible_to<double>;
  { o.hessian(set) } -> std::same_as<Eigen::MatrixXd>;
};

// Adapts the surrogate model's per-sample MSE.
class SurrogateObjective {
 public:
  using sample_type = Sample;

  explicit SurrogateObjective(const ModelState& state) : state_(state) {}

  std::size_t parameter_count() const { return state_.params.size(); }
  Eigen::VectorXd sample_gradient(const Sample& s) const;
  double sample_weight(const Sample& s) const { return static_cast<double>(s.target.size()); }
  Eigen::MatrixXd hessian(std::span<const Sample> set) const;

 private:
  const ModelState& state_;
};

// Per sample j of `train`: -∇L(test)ᵀ (H + λI)⁻¹ ∇L_j, with H the Hessian of
// the pooled loss over `train` (exact) or the weighted mean squared
// per-sample gradient (diagonal).
template <InfluenceObjective O>
std::vector<double> influence_scores(const O& objective,
                                     std::span<const typename O::sample_type> train,
                                     std::span<const typename O::sample_type> test,
                                     const InfluenceOptions& options = {}) {
  const std::size_t P = objective.parameter_count();
  if (train.empty() || test.empty()) throw ArgumentError("influence_scores: empty sample set");
  if (options.mode == HessianMode::exact && P > options.exact_parameter_cap) {
    throw ConfigError("influence_scores: exact Hessian requested for " + std::to_string(P) +
                      " parameters, cap is " + std::to_string(options.exact_parameter_cap));
  }

  Eigen::MatrixXd grads(static_cast<Eigen::Index>(P), static_cast<Eigen::Index>(train.size()));
  Eigen::VectorXd weights(static_cast<Eigen::Index>(train.size()));
  for (std::size_t j = 0; j < train.size(); ++j) {
    grads.col(static_cast<Eigen::Index>(j)) = objective.sample_gradient(train[j]);
    weights(static_cast<Eigen::Index>(j)) = objective.sample_weight(train[j]);
  }
  Eigen::VectorXd test_grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(P));
  double test_weight = 0.0;
  for (const auto& s : test) {
    const double w = objective.sample_weight(s);
    test_grad += w * objective.sample_gradient(s);
    test_weight += w;
  }
  test_grad /= test_weight;

  Eigen::VectorXd solved;
  if (options.mode == HessianMode::exact) {
    Eigen::MatrixXd h = objective.hessian(train);
    h.diagonal().array() += options.damping;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
    if (ldlt.info() != Eigen::Success || !(ldlt.rcond() > 1e-14)) {
      throw NumericalError("influence_scores: damped Hessian is singular");
    }
    solved = ldlt.solve(test_grad);
  } else {
    Eigen::VectorXd diag = (grads.array().square().matrix() * weights) / weights.sum();
    diag.array() += options.damping;
    solved = test_grad.array() / diag.array();
  }
  if (!solved.allFinite()) throw NumericalError("influence_scores: non-finite solve");

  const Eigen::VectorXd scores = -(grads.transpose() * solved);
  return {scores.data(), scores.data() + scores.size()};
}

struct InfluenceReport {
  std::vector<double> i_train;
  std::vector<double> i_memory;
  double gamma = 1.0;
  std::vector<double> i_star;
};

// γ* = clamp((I_train - I_memory)ᵀ I_train / ‖I_train - I_memory‖², 0, 1),
// with γ* = 1 when the two vectors coincide; I* = γ* I_train + (1-γ*) I_memory.
InfluenceReport combine_influence(std::vector<double> i_train, std::vector<double> i_memory);

struct BufferEntry {
  Sample sample;
  double score = 0.0;
};

class MemoryBuffer {
 public:
  explicit MemoryBuffer(std::size_t capacity = 0) : capacity_(capacity) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<BufferEntry>& entries() const { return entries_; }
  bool contains(std::uint64_t timestamp_id) const;

  // Fills the buffer with up to `capacity` samples drawn uniformly from `pool`.
  void initialize_random(std::span<const Sample> pool, std::mt19937_64& rng);

 private:
  friend MemoryBuffer update_buffer(const MemoryBuffer&, std::vector<BufferEntry>, std::size_t,
                                    BufferRanking);
  std::size_t capacity_;
  std::vector<BufferEntry> entries_;
};

// Merges candidates into the buffer (a candidate replaces an entry with the
// same timestamp), ranks by score descending (older timestamp first on
// ties) and keeps the top `capacity`.
MemoryBuffer update_buffer(const MemoryBuffer& buffer, std::vector<BufferEntry> candidates,
                           std::size_t capacity,
                           BufferRanking ranking = BufferRanking::signed_descending);

struct SimulatedTestSets {
  Batch memory;  // D_memory
  Batch train;   // D_train
};

// Uniform draws without replacement, or with replacement when a pool is
// smaller than `size`.
SimulatedTestSets sample_simulated_test_sets(const MemoryBuffer& buffer,
                                             std::span<const Sample> seen_train,
                                             std::size_t size, std::mt19937_64& rng);

// Draws `size` items from `pool` as described above.
std::vector<std::size_t> draw_indices(std::size_t pool, std::size_t size, std::mt19937_64& rng);

// Plain optimisation over the batch stream for `epochs` passes: no influence
// evaluation and no buffer access.
void pseudo_update(ModelState& state, std::span<const Batch> stream, int epochs, double lr);

}  // namespace infgnn
