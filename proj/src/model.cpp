#include "infgnn/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "infgnn/errors.hpp"
#include "model_kernels.hpp"

namespace infgnn {

using detail::Activations;
using detail::Dual;

ParamLayout::ParamLayout(const ModelConfig& c) {
  std::size_t at = 0;
  auto take = [&at](std::size_t n) {
    const std::size_t start = at;
    at += n;
    return start;
  };
  gnn1_neighbor = take(c.features * c.hidden1);
  gnn1_self = take(c.features * c.hidden1);
  conv_kernel = take(c.conv_width * c.hidden1);
  conv_bias = take(c.hidden1);
  gnn2_neighbor = take(c.hidden1 * c.hidden2);
  gnn2_self = take(c.hidden1 * c.hidden2);
  head_weight = take(c.input_steps * c.hidden2 * c.features * c.horizon);
  head_bias = take(c.features * c.horizon);
  total = at;
}

std::size_t parameter_count(const ModelConfig& c) { return ParamLayout(c).total; }

namespace {

void check_config(const ModelConfig& c) {
  if (c.features == 0 || c.input_steps == 0 || c.horizon == 0 || c.hidden1 == 0 ||
      c.hidden2 == 0) {
    throw ConfigError("model dimensions must be positive");
  }
  if (c.conv_width % 2 == 0) throw ConfigError("conv_width must be odd");
}

}  // namespace

ModelState init_model(const ModelConfig& config, std::uint64_t seed) {
  check_config(config);
  const ParamLayout L(config);
  ModelState s{config, std::vector<double>(L.total, 0.0), std::vector<double>(L.total, 0.0),
               std::vector<double>(L.total, 0.0), 0};
  std::mt19937_64 rng(seed);
  auto glorot = [&](std::size_t offset, std::size_t fan_in, std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (std::size_t i = 0; i < fan_in * fan_out; ++i) s.params[offset + i] = u(rng);
  };
  const auto& c = config;
  glorot(L.gnn1_neighbor, c.features, c.hidden1);
  glorot(L.gnn1_self, c.features, c.hidden1);
  glorot(L.conv_kernel, c.conv_width, c.hidden1);
  glorot(L.gnn2_neighbor, c.hidden1, c.hidden2);
  glorot(L.gnn2_self, c.hidden1, c.hidden2);
  glorot(L.head_weight, c.input_steps * c.hidden2, c.features * c.horizon);
  return s;
}

// ---------------------------------------------------------------------------
// Adjacency

Adjacency::Adjacency(std::size_t n, std::vector<std::size_t> row_start,
                     std::vector<Entry> entries)
    : n_(n), row_start_(std::move(row_start)), entries_(std::move(entries)) {
  if (row_start_.size() != n_ + 1 || row_start_.back() != entries_.size()) {
    throw ArgumentError("adjacency row index is inconsistent");
  }
}

std::vector<double> Adjacency::dense() const {
  std::vector<double> out(n_ * n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    for (const Entry& e : row(i)) out[i * n_ + e.col] = e.weight;
  }
  return out;
}

Adjacency normalize_adjacency(std::span<const double> dense, std::size_t n, AdjacencyMode mode) {
  if (dense.size() != n * n) throw ArgumentError("adjacency must be n x n");
  std::vector<double> degree(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = dense[i * n + j];
      if (w < 0.0 || !std::isfinite(w)) {
        throw ArgumentError("adjacency has a negative or non-finite entry");
      }
      degree[i] += w;
    }
  }
  std::vector<std::size_t> row_start{0};
  std::vector<Adjacency::Entry> entries;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = dense[i * n + j];
      if (w == 0.0) continue;
      double v = w;
      if (mode == AdjacencyMode::symmetric) v = w / std::sqrt(degree[i] * degree[j]);
      entries.push_back({j, v});
    }
    row_start.push_back(entries.size());
  }
  return Adjacency(n, std::move(row_start), std::move(entries));
}

Adjacency normalize_adjacency(const IntervalGraph& g, AdjacencyMode mode) {
  return normalize_adjacency(g.adjacency_matrix(), g.size(), mode);
}

// ---------------------------------------------------------------------------
// Forward / loss

void validate_batch(const ModelConfig& c, std::span<const Sample> batch) {
  std::set<std::uint64_t> ids;
  for (const Sample& s : batch) {
    if (!s.graph || s.graph->size() != s.nodes) {
      throw ArgumentError("sample adjacency does not match its node count");
    }
    if (s.input.size() != s.nodes * c.features * c.input_steps ||
        s.target.size() != s.nodes * c.features * c.horizon) {
      throw ArgumentError("sample window shape does not match the model configuration");
    }
    if (!ids.insert(s.timestamp_id).second) {
      throw ArgumentError("duplicate timestamp id " + std::to_string(s.timestamp_id) +
                          " in batch");
    }
  }
}

std::vector<double> forward(const ModelState& state, const Adjacency& a,
                            std::span<const double> input) {
  const ModelConfig& c = state.config;
  const std::size_t per_node = c.features * c.input_steps;
  if (a.size() == 0 || input.size() != a.size() * per_node) {
    throw ArgumentError("forward: input has " + std::to_string(input.size()) +
                        " values, expected " + std::to_string(a.size() * per_node));
  }
  const ParamLayout L(c);
  Activations<double> act;
  std::vector<double> y(a.size() * c.features * c.horizon, 0.0);
  detail::forward_pass<double>(c, L, state.params.data(), a, input.data(), a.size(), y.data(),
                               act);
  return y;
}

LossGradient loss_and_gradients(const ModelState& state, std::span<const Sample> batch) {
  const ModelConfig& c = state.config;
  if (batch.empty()) throw ArgumentError("loss_and_gradients: empty batch");
  validate_batch(c, batch);
  const ParamLayout L(c);
  std::size_t entries = 0;
  for (const Sample& s : batch) entries += s.target.size();
  const double scale = 1.0 / static_cast<double>(entries);

  LossGradient out{0.0, std::vector<double>(L.total, 0.0)};
  Activations<double> act;
  std::vector<double> y, dy;
  for (const Sample& s : batch) {
    out.loss += detail::squared_error_gradient<double>(c, L, state.params.data(), s, scale, act,
                                                       y, dy, out.gradient.data());
  }
  out.loss *= scale;
  return out;
}

LossGradient sample_loss_gradient(const ModelState& state, const Sample& sample) {
  return loss_and_gradients(state, std::span<const Sample>(&sample, 1));
}

double batch_loss(const ModelState& state, std::span<const Sample> batch) {
  const ModelConfig& c = state.config;
  validate_batch(c, batch);
  double sum = 0.0;
  std::size_t entries = 0;
  for (const Sample& s : batch) {
    const auto y = forward(state, *s.graph, s.input);
    for (std::size_t q = 0; q < y.size(); ++q) {
      const double e = y[q] - s.target[q];
      sum += e * e;
    }
    entries += y.size();
  }
  return entries ? sum / static_cast<double>(entries) : 0.0;
}

void accumulate_output_vjp(const ModelState& state, const Adjacency& a,
                           std::span<const double> input, std::span<const double> d_output,
                           std::span<double> grad) {
  const ModelConfig& c = state.config;
  const ParamLayout L(c);
  const std::size_t n = a.size();
  if (input.size() != n * c.features * c.input_steps ||
      d_output.size() != n * c.features * c.horizon || grad.size() != L.total) {
    throw ArgumentError("accumulate_output_vjp: shape mismatch");
  }
  Activations<double> act;
  std::vector<double> y(d_output.size());
  detail::forward_pass<double>(c, L, state.params.data(), a, input.data(), n, y.data(), act);
  detail::backward_pass<double>(c, L, state.params.data(), a, input.data(), n, act,
                                d_output.data(), grad.data());
}

std::vector<double> loss_hessian(const ModelState& state, std::span<const Sample> batch) {
  const ModelConfig& c = state.config;
  if (batch.empty()) throw ArgumentError("loss_hessian: empty batch");
  validate_batch(c, batch);
  const ParamLayout L(c);
  const std::size_t P = L.total;
  std::size_t entries = 0;
  for (const Sample& s : batch) entries += s.target.size();
  const double scale = 1.0 / static_cast<double>(entries);

  std::vector<Dual> p(P);
  for (std::size_t i = 0; i < P; ++i) p[i] = Dual(state.params[i]);
  std::vector<double> hessian(P * P, 0.0);
  std::vector<Dual> g(P);
  Activations<Dual> act;
  std::vector<Dual> y, dy;
  for (std::size_t col = 0; col < P; ++col) {
    p[col].d = 1.0;
    std::fill(g.begin(), g.end(), Dual());
    for (const Sample& s : batch) {
      detail::squared_error_gradient<Dual>(c, L, p.data(), s, scale, act, y, dy, g.data());
    }
    for (std::size_t row = 0; row < P; ++row) hessian[row * P + col] = g[row].d;
    p[col].d = 0.0;
  }
  for (std::size_t i = 0; i < P; ++i) {
    for (std::size_t j = i + 1; j < P; ++j) {
      const double avg = 0.5 * (hessian[i * P + j] + hessian[j * P + i]);
      hessian[i * P + j] = hessian[j * P + i] = avg;
    }
  }
  return hessian;
}

// ---------------------------------------------------------------------------
// Optimizer

void optimizer_step(ModelState& state, std::span<const double> grads, double lr,
                    const AdamOptions& o) {
  const std::size_t P = state.params.size();
  if (grads.size() != P) throw ArgumentError("optimizer_step: gradient size mismatch");
  for (std::size_t i = 0; i < P; ++i) {
    if (!std::isfinite(grads[i])) {
      throw NumericalError("optimizer_step: non-finite gradient at parameter " +
                           std::to_string(i) + "; update rejected");
    }
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(o.beta1, t);
  const double correction2 = 1.0 - std::pow(o.beta2, t);
  for (std::size_t i = 0; i < P; ++i) {
    const double g = grads[i];
    state.moment1[i] = o.beta1 * state.moment1[i] + (1.0 - o.beta1) * g;
    state.moment2[i] = o.beta2 * state.moment2[i] + (1.0 - o.beta2) * g * g;
    const double m_hat = state.moment1[i] / correction1;
    const double v_hat = state.moment2[i] / correction2;
    state.params[i] -= lr * m_hat / (std::sqrt(v_hat) + o.epsilon);
  }
}

std::string to_string(AdjacencyMode mode) {
  return mode == AdjacencyMode::symmetric ? "symmetric" : "raw";
}

AdjacencyMode adjacency_mode_from_string(const std::string& s) {
  if (s == "symmetric") return AdjacencyMode::symmetric;
  if (s == "raw") return AdjacencyMode::raw;
  throw ConfigError("unknown adjacency mode '" + s + "'");
}

}  // namespace infgnn
