#pragma once

// Forward and reverse passes of the surrogate, generic over the parameter
// scalar so the same code yields gradients (double) and Hessian-vector
// products (Dual). Layouts: input [node][feature][step], hidden
// [node][step][channel], output [node][feature][horizon].

#include <algorithm>
#include <cstddef>
#include <vector>

#include "dual.hpp"
#include "infgnn/model.hpp"

namespace infgnn::detail {

template <class T>
struct Activations {
  std::vector<T> ax;  // n x M x D   neighbour-aggregated input
  std::vector<T> z1, h1;
  std::vector<T> z2, h2;
  std::vector<T> ah;  // n x M x h1  neighbour-aggregated conv output
  std::vector<T> z3, h3;
};

template <class T>
inline T relu(const T& x) {
  return value_of(x) > 0.0 ? x : T(0.0);
}

template <class T>
void forward_pass(const ModelConfig& c, const ParamLayout& L, const T* p, const Adjacency& a,
                  const double* x, std::size_t n, T* y, Activations<T>& act) {
  const std::size_t D = c.features, M = c.input_steps, K = c.horizon;
  const std::size_t H1 = c.hidden1, H2 = c.hidden2, W = c.conv_width;
  const std::size_t half = W / 2;

  // The input does not depend on parameters, but ax is stored as T so the
  // weight-gradient loops below stay uniform.
  act.ax.assign(n * M * D, T(0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& e : a.row(i)) {
      for (std::size_t d = 0; d < D; ++d) {
        const double* xs = x + (e.col * D + d) * M;
        for (std::size_t m = 0; m < M; ++m) act.ax[(i * M + m) * D + d] += e.weight * xs[m];
      }
    }
  }

  act.z1.assign(n * M * H1, T(0.0));
  act.h1.resize(n * M * H1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < M; ++m) {
      T* z = &act.z1[(i * M + m) * H1];
      for (std::size_t d = 0; d < D; ++d) {
        const T& agg = act.ax[(i * M + m) * D + d];
        const double self = x[(i * D + d) * M + m];
        const T* wn = p + L.gnn1_neighbor + d * H1;
        const T* ws = p + L.gnn1_self + d * H1;
        for (std::size_t h = 0; h < H1; ++h) z[h] += agg * wn[h] + ws[h] * self;
      }
      for (std::size_t h = 0; h < H1; ++h) act.h1[(i * M + m) * H1 + h] = relu(z[h]);
    }
  }

  act.z2.resize(n * M * H1);
  act.h2.resize(n * M * H1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < M; ++m) {
      T* z = &act.z2[(i * M + m) * H1];
      for (std::size_t h = 0; h < H1; ++h) z[h] = p[L.conv_bias + h];
      for (std::size_t j = 0; j < W; ++j) {
        if (m + j < half || m + j - half >= M) continue;
        const std::size_t src = m + j - half;
        const T* k = p + L.conv_kernel + j * H1;
        const T* hin = &act.h1[(i * M + src) * H1];
        for (std::size_t h = 0; h < H1; ++h) z[h] += k[h] * hin[h];
      }
      for (std::size_t h = 0; h < H1; ++h) act.h2[(i * M + m) * H1 + h] = relu(z[h]);
    }
  }

  act.ah.assign(n * M * H1, T(0.0));
  for (std::size_t i = 0; i < n; ++i) {
    T* dst = &act.ah[i * M * H1];
    for (const auto& e : a.row(i)) {
      const T* src = &act.h2[e.col * M * H1];
      for (std::size_t q = 0; q < M * H1; ++q) dst[q] += e.weight * src[q];
    }
  }

  act.z3.assign(n * M * H2, T(0.0));
  act.h3.resize(n * M * H2);
  for (std::size_t r = 0; r < n * M; ++r) {
    T* z = &act.z3[r * H2];
    const T* agg = &act.ah[r * H1];
    const T* self = &act.h2[r * H1];
    for (std::size_t h = 0; h < H1; ++h) {
      const T* wn = p + L.gnn2_neighbor + h * H2;
      const T* ws = p + L.gnn2_self + h * H2;
      for (std::size_t o = 0; o < H2; ++o) z[o] += agg[h] * wn[o] + self[h] * ws[o];
    }
    for (std::size_t o = 0; o < H2; ++o) act.h3[r * H2 + o] = relu(z[o]);
  }

  const std::size_t out = D * K;
  const std::size_t flat = M * H2;
  for (std::size_t i = 0; i < n; ++i) {
    T* yi = y + i * out;
    for (std::size_t o = 0; o < out; ++o) yi[o] = p[L.head_bias + o];
    const T* hi = &act.h3[i * flat];
    for (std::size_t f = 0; f < flat; ++f) {
      const T* w = p + L.head_weight + f * out;
      for (std::size_t o = 0; o < out; ++o) yi[o] += hi[f] * w[o];
    }
  }
}

// Accumulates dL/dparams into g given dL/dy.
template <class T>
void backward_pass(const ModelConfig& c, const ParamLayout& L, const T* p, const Adjacency& a,
                   const double* x, std::size_t n, const Activations<T>& act, const T* dy, T* g) {
  const std::size_t D = c.features, M = c.input_steps, K = c.horizon;
  const std::size_t H1 = c.hidden1, H2 = c.hidden2, W = c.conv_width;
  const std::size_t half = W / 2;
  const std::size_t out = D * K;
  const std::size_t flat = M * H2;

  std::vector<T> dz3(n * M * H2, T(0.0));
  for (std::size_t i = 0; i < n; ++i) {
    const T* dyi = dy + i * out;
    for (std::size_t o = 0; o < out; ++o) g[L.head_bias + o] += dyi[o];
    const T* hi = &act.h3[i * flat];
    for (std::size_t f = 0; f < flat; ++f) {
      const T* w = p + L.head_weight + f * out;
      T* gw = g + L.head_weight + f * out;
      T acc(0.0);
      for (std::size_t o = 0; o < out; ++o) {
        gw[o] += hi[f] * dyi[o];
        acc += w[o] * dyi[o];
      }
      if (value_of(act.z3[i * flat + f]) > 0.0) dz3[i * flat + f] = acc;
    }
  }

  std::vector<T> dah(n * M * H1, T(0.0));
  std::vector<T> dh2(n * M * H1, T(0.0));
  for (std::size_t r = 0; r < n * M; ++r) {
    const T* dz = &dz3[r * H2];
    const T* agg = &act.ah[r * H1];
    const T* self = &act.h2[r * H1];
    for (std::size_t h = 0; h < H1; ++h) {
      const T* wn = p + L.gnn2_neighbor + h * H2;
      const T* ws = p + L.gnn2_self + h * H2;
      T* gn = g + L.gnn2_neighbor + h * H2;
      T* gs = g + L.gnn2_self + h * H2;
      T acc_n(0.0), acc_s(0.0);
      for (std::size_t o = 0; o < H2; ++o) {
        gn[o] += agg[h] * dz[o];
        gs[o] += self[h] * dz[o];
        acc_n += wn[o] * dz[o];
        acc_s += ws[o] * dz[o];
      }
      dah[r * H1 + h] = acc_n;
      dh2[r * H1 + h] += acc_s;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const T* src = &dah[i * M * H1];
    for (const auto& e : a.row(i)) {
      T* dst = &dh2[e.col * M * H1];
      for (std::size_t q = 0; q < M * H1; ++q) dst[q] += e.weight * src[q];
    }
  }

  std::vector<T> dh1(n * M * H1, T(0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t r = (i * M + m) * H1;
      for (std::size_t h = 0; h < H1; ++h) {
        if (!(value_of(act.z2[r + h]) > 0.0)) continue;
        const T dz = dh2[r + h];
        g[L.conv_bias + h] += dz;
        for (std::size_t j = 0; j < W; ++j) {
          if (m + j < half || m + j - half >= M) continue;
          const std::size_t src = (i * M + (m + j - half)) * H1 + h;
          g[L.conv_kernel + j * H1 + h] += dz * act.h1[src];
          dh1[src] += p[L.conv_kernel + j * H1 + h] * dz;
        }
      }
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t m = 0; m < M; ++m) {
      const std::size_t r = (i * M + m) * H1;
      for (std::size_t h = 0; h < H1; ++h) {
        if (!(value_of(act.z1[r + h]) > 0.0)) continue;
        const T dz = dh1[r + h];
        for (std::size_t d = 0; d < D; ++d) {
          g[L.gnn1_neighbor + d * H1 + h] += act.ax[(i * M + m) * D + d] * dz;
          g[L.gnn1_self + d * H1 + h] += dz * x[(i * D + d) * M + m];
        }
      }
    }
  }
}

// Adds the gradient of Σ (y - target)² · scale to g and returns that sum.
template <class T>
T squared_error_gradient(const ModelConfig& c, const ParamLayout& L, const T* p, const Sample& s,
                         double scale, Activations<T>& act, std::vector<T>& y, std::vector<T>& dy,
                         T* g) {
  const std::size_t out = s.nodes * c.features * c.horizon;
  y.assign(out, T(0.0));
  forward_pass<T>(c, L, p, *s.graph, s.input.data(), s.nodes, y.data(), act);
  dy.resize(out);
  T sum(0.0);
  for (std::size_t q = 0; q < out; ++q) {
    const T e = y[q] - T(s.target[q]);
    sum += e * e;
    dy[q] = T(2.0 * scale) * e;
  }
  backward_pass<T>(c, L, p, *s.graph, s.input.data(), s.nodes, act, dy.data(), g);
  return sum;
}

}  // namespace infgnn::detail
