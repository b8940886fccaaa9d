#include "infgnn/influence.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace infgnn {

Eigen::VectorXd SurrogateObjective::sample_gradient(const Sample& s) const {
  LossGradient lg = sample_loss_gradient(state_, s);
  return Eigen::Map<Eigen::VectorXd>(lg.gradient.data(),
                                     static_cast<Eigen::Index>(lg.gradient.size()));
}

Eigen::MatrixXd SurrogateObjective::hessian(std::span<const Sample> set) const {
  std::vector<double> h = loss_hessian(state_, set);
  const auto P = static_cast<Eigen::Index>(state_.params.size());
  return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      h.data(), P, P);
}

InfluenceReport combine_influence(std::vector<double> i_train, std::vector<double> i_memory) {
  if (i_train.size() != i_memory.size()) {
    throw ArgumentError("combine_influence: vectors differ in length");
  }
  double numer = 0.0, denom = 0.0;
  for (std::size_t j = 0; j < i_train.size(); ++j) {
    const double diff = i_train[j] - i_memory[j];
    numer += diff * i_train[j];
    denom += diff * diff;
  }
  double gamma = 1.0;
  if (denom > 0.0) {
    gamma = numer / denom;
    gamma = std::isfinite(gamma) ? std::clamp(gamma, 0.0, 1.0) : 1.0;
  }
  std::vector<double> i_star(i_train.size());
  for (std::size_t j = 0; j < i_star.size(); ++j) {
    i_star[j] = gamma * i_train[j] + (1.0 - gamma) * i_memory[j];
  }
  return {std::move(i_train), std::move(i_memory), gamma, std::move(i_star)};
}

bool MemoryBuffer::contains(std::uint64_t timestamp_id) const {
  return std::any_of(entries_.begin(), entries_.end(), [&](const BufferEntry& e) {
    return e.sample.timestamp_id == timestamp_id;
  });
}

std::vector<std::size_t> draw_indices(std::size_t pool, std::size_t size, std::mt19937_64& rng) {
  std::vector<std::size_t> out;
  if (pool == 0) return out;
  if (pool >= size) {
    // partial Fisher-Yates
    std::vector<std::size_t> idx(pool);
    for (std::size_t i = 0; i < pool; ++i) idx[i] = i;
    for (std::size_t i = 0; i < size; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, pool - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    out.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(size));
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, pool - 1);
    for (std::size_t i = 0; i < size; ++i) out.push_back(pick(rng));
  }
  return out;
}

void MemoryBuffer::initialize_random(std::span<const Sample> pool, std::mt19937_64& rng) {
  entries_.clear();
  const std::size_t n = std::min(capacity_, pool.size());
  for (std::size_t i : draw_indices(pool.size(), n, rng)) entries_.push_back({pool[i], 0.0});
}

MemoryBuffer update_buffer(const MemoryBuffer& buffer, std::vector<BufferEntry> candidates,
                           std::size_t capacity, BufferRanking ranking) {
  std::map<std::uint64_t, BufferEntry> merged;
  for (const BufferEntry& e : buffer.entries()) merged.insert_or_assign(e.sample.timestamp_id, e);
  for (BufferEntry& e : candidates) {
    const std::uint64_t id = e.sample.timestamp_id;
    merged.insert_or_assign(id, std::move(e));
  }
  std::vector<BufferEntry> ranked;
  ranked.reserve(merged.size());
  for (auto& [id, e] : merged) ranked.push_back(std::move(e));
  auto key = [ranking](const BufferEntry& e) {
    return ranking == BufferRanking::magnitude ? std::abs(e.score) : e.score;
  };
  std::stable_sort(ranked.begin(), ranked.end(), [&](const BufferEntry& a, const BufferEntry& b) {
    const double ka = key(a), kb = key(b);
    if (ka != kb) return ka > kb;
    return a.sample.timestamp_id < b.sample.timestamp_id;
  });
  if (ranked.size() > capacity) ranked.resize(capacity);
  MemoryBuffer out(capacity);
  out.entries_ = std::move(ranked);
  return out;
}

SimulatedTestSets sample_simulated_test_sets(const MemoryBuffer& buffer,
                                             std::span<const Sample> seen_train,
                                             std::size_t size, std::mt19937_64& rng) {
  if (buffer.empty() || seen_train.empty()) {
    throw ArgumentError("sample_simulated_test_sets: empty pool");
  }
  SimulatedTestSets out;
  for (std::size_t i : draw_indices(buffer.size(), size, rng)) {
    out.memory.push_back(buffer.entries()[i].sample);
  }
  for (std::size_t i : draw_indices(seen_train.size(), size, rng)) {
    out.train.push_back(seen_train[i]);
  }
  return out;
}

void pseudo_update(ModelState& state, std::span<const Batch> stream, int epochs, double lr) {
  for (int e = 0; e < epochs; ++e) {
    for (const Batch& b : stream) {
      if (b.empty()) continue;
      const LossGradient lg = loss_and_gradients(state, b);
      optimizer_step(state, lg.gradient, lr);
    }
  }
}

}  // namespace infgnn
