#include "infgnn/soft_ri.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "infgnn/errors.hpp"
#include "infgnn/ri.hpp"

namespace infgnn {
namespace {

struct SoftMass {
  std::vector<double> mass;            // smoothed, normalized
  std::vector<std::vector<double>> r;  // per sample soft assignment (only when needed)
  std::vector<double> u;               // per sample position in bin units
};

SoftMass soft_mass(std::span<const double> x, double lo, double width, std::size_t bins,
                   bool keep_assignments) {
  SoftMass out;
  out.mass.assign(bins, 0.0);
  if (keep_assignments) {
    out.r.resize(x.size());
    out.u.resize(x.size());
  }
  std::vector<double> k(bins);
  const double B = static_cast<double>(bins);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = (x[i] - lo) / width * B;
    double z = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      const double dist = u - (static_cast<double>(b) + 0.5);
      k[b] = std::exp(-0.5 * dist * dist);
      z += k[b];
    }
    for (std::size_t b = 0; b < bins; ++b) {
      k[b] /= z;
      out.mass[b] += k[b];
    }
    if (keep_assignments) {
      out.r[i] = k;
      out.u[i] = u;
    }
  }
  const double n = static_cast<double>(x.size());
  const double norm = 1.0 + kLaplaceAlpha * B;
  for (double& m : out.mass) m = (m / n + kLaplaceAlpha) / norm;
  return out;
}

// Adds d/dx of Σ_b g_b · mass_b for one sample set into grad, and the range
// sensitivities into d_lo / d_hi.
void pull_back(const SoftMass& sm, std::span<const double> x, const std::vector<double>& g_mass,
               double lo, double hi, std::size_t bins, double upstream, std::span<double> grad,
               double& d_lo, double& d_hi) {
  const double B = static_cast<double>(bins);
  const double width = hi - lo;
  const double n = static_cast<double>(x.size());
  const double dm_dc = 1.0 / (n * (1.0 + kLaplaceAlpha * B));
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto& r = sm.r[i];
    double centroid = 0.0;
    for (std::size_t b = 0; b < bins; ++b) centroid += r[b] * (static_cast<double>(b) + 0.5);
    double d_u = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      d_u += g_mass[b] * dm_dc * r[b] * ((static_cast<double>(b) + 0.5) - centroid);
    }
    d_u *= upstream;
    grad[i] += d_u * B / width;
    d_lo += d_u * B * (x[i] - hi) / (width * width);
    d_hi += d_u * (-B) * (x[i] - lo) / (width * width);
  }
}

}  // namespace

double soft_sample_jsd(std::span<const double> a, std::span<const double> b, std::size_t bins,
                       std::span<double> grad_a, std::span<double> grad_b, double upstream) {
  if (a.empty() || b.empty()) throw ArgumentError("soft_sample_jsd: empty sample");
  const bool want_grad = !grad_a.empty() || !grad_b.empty();
  if (want_grad && (grad_a.size() != a.size() || grad_b.size() != b.size())) {
    throw ArgumentError("soft_sample_jsd: gradient spans must match the samples");
  }
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin);
  const double hi = std::max(*amax, *bmax);
  if (!(lo < hi)) return 0.0;
  const double width = hi - lo;

  const SoftMass p = soft_mass(a, lo, width, bins, want_grad);
  const SoftMass q = soft_mass(b, lo, width, bins, want_grad);
  double kl_p = 0.0, kl_q = 0.0;
  std::vector<double> g_p(bins), g_q(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    const double m = 0.5 * (p.mass[k] + q.mass[k]);
    kl_p += p.mass[k] * std::log(p.mass[k] / m);
    kl_q += q.mass[k] * std::log(q.mass[k] / m);
    g_p[k] = 0.5 * std::log(p.mass[k] / m);
    g_q[k] = 0.5 * std::log(q.mass[k] / m);
  }
  const double value = 0.5 * (kl_p + kl_q);
  if (!want_grad) return value;

  double d_lo = 0.0, d_hi = 0.0;
  pull_back(p, a, g_p, lo, hi, bins, upstream, grad_a, d_lo, d_hi);
  pull_back(q, b, g_q, lo, hi, bins, upstream, grad_b, d_lo, d_hi);
  // The range follows the first extreme element; a's elements win ties.
  if (*amin <= *bmin) {
    grad_a[static_cast<std::size_t>(amin - a.begin())] += d_lo;
  } else {
    grad_b[static_cast<std::size_t>(bmin - b.begin())] += d_lo;
  }
  if (*amax >= *bmax) {
    grad_a[static_cast<std::size_t>(amax - a.begin())] += d_hi;
  } else {
    grad_b[static_cast<std::size_t>(bmax - b.begin())] += d_hi;
  }
  return value;
}

namespace {

template <class Divergence>
SoftRiResult relation_importance_impl(const RiSeries& s, bool with_gradient, Divergence&& div) {
  const std::size_t n = s.prev.size();
  if (s.curr.size() != n || s.neighbors.size() != n) {
    throw ArgumentError("relation importance series are misaligned");
  }
  SoftRiResult out;
  out.per_target.assign(s.targets.size(), std::numeric_limits<double>::quiet_NaN());
  if (with_gradient) {
    out.grad_prev.resize(n);
    out.grad_curr.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      out.grad_prev[i].assign(s.prev[i].size(), 0.0);
      out.grad_curr[i].assign(s.curr[i].size(), 0.0);
    }
  }
  std::size_t counted = 0;
  for (std::size_t t = 0; t < s.targets.size(); ++t) {
    if (!s.neighbors[s.targets[t]].empty()) ++counted;
  }
  if (counted == 0) return out;
  const double inv = 1.0 / static_cast<double>(counted);

  std::vector<double> temporal(n, std::numeric_limits<double>::quiet_NaN());
  auto temporal_of = [&](std::size_t i) {
    if (std::isnan(temporal[i])) temporal[i] = div(s.curr[i], s.prev[i], nullptr, nullptr, 0.0);
    return temporal[i];
  };

  double total = 0.0;
  for (std::size_t t = 0; t < s.targets.size(); ++t) {
    const std::size_t v = s.targets[t];
    if (s.neighbors[v].empty()) continue;
    const double tv = temporal_of(v);
    double ri = 0.0;
    double d_tv = 0.0;
    for (std::size_t u : s.neighbors[v]) {
      const double tu = temporal_of(u);
      const double raw_c = div(s.curr[u], s.curr[v], nullptr, nullptr, 0.0);
      const double raw_p = div(s.prev[u], s.prev[v], nullptr, nullptr, 0.0);
      const double sc = std::max(raw_c, kRiDenominatorFloor);
      const double sp = std::max(raw_p, kRiDenominatorFloor);
      const double term = tu * tv / (sc * sp);
      ri += term;
      if (!with_gradient) continue;
      d_tv += tu / (sc * sp);
      const double d_tu = tv / (sc * sp) * inv;
      div(s.curr[u], s.prev[u], &out.grad_curr[u], &out.grad_prev[u], d_tu);
      if (raw_c > kRiDenominatorFloor) {
        div(s.curr[u], s.curr[v], &out.grad_curr[u], &out.grad_curr[v], -term / sc * inv);
      }
      if (raw_p > kRiDenominatorFloor) {
        div(s.prev[u], s.prev[v], &out.grad_prev[u], &out.grad_prev[v], -term / sp * inv);
      }
    }
    if (with_gradient) div(s.curr[v], s.prev[v], &out.grad_curr[v], &out.grad_prev[v], d_tv * inv);
    out.per_target[t] = ri;
    total += ri;
  }
  out.mean = total * inv;
  return out;
}

}  // namespace

SoftRiResult soft_relation_importance(const RiSeries& series, std::size_t bins,
                                      bool with_gradient) {
  auto div = [bins](const std::vector<double>& a, const std::vector<double>& b,
                    std::vector<double>* ga, std::vector<double>* gb, double upstream) {
    if (!ga) return soft_sample_jsd(a, b, bins);
    return soft_sample_jsd(a, b, bins, *ga, *gb, upstream);
  };
  return relation_importance_impl(series, with_gradient, div);
}

SoftRiResult hard_relation_importance(const RiSeries& series, std::size_t bins) {
  auto div = [bins](const std::vector<double>& a, const std::vector<double>& b,
                    std::vector<double>*, std::vector<double>*, double) {
    return sample_jsd(a, b, bins);
  };
  return relation_importance_impl(series, false, div);
}

}  // namespace infgnn
