#include "infgnn/distrib.hpp"

#include <algorithm>
#include <cmath>

#include "infgnn/errors.hpp"

namespace infgnn {

Histogram::Histogram(std::vector<double> bin_edges, std::vector<double> mass)
    : bin_edges_(std::move(bin_edges)), mass_(std::move(mass)) {
  if (mass_.empty() || bin_edges_.size() != mass_.size() + 1) {
    throw ArgumentError("histogram needs B >= 1 bins and B+1 edges");
  }
  if (!std::is_sorted(bin_edges_.begin(), bin_edges_.end(), std::less_equal<>())) {
    throw ArgumentError("histogram edges must be strictly increasing");
  }
  double total = 0.0;
  for (double m : mass_) {
    if (!(m >= 0.0)) throw ArgumentError("histogram mass must be nonnegative");
    total += m;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("histogram mass must sum to 1");
}

Histogram build_histogram(std::span<const double> samples, std::size_t bins,
                          std::pair<double, double> range, double alpha) {
  const auto [lo, hi] = range;
  if (samples.empty()) throw ArgumentError("build_histogram: no samples");
  if (bins == 0) throw ArgumentError("build_histogram: bins must be positive");
  if (!(lo < hi)) throw ArgumentError("build_histogram: range must satisfy lo < hi");

  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<double> edges(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) edges[b] = lo + width * static_cast<double>(b);
  edges[bins] = hi;

  std::vector<double> counts(bins, 0.0);
  for (double s : samples) {
    const double pos = (s - lo) / (hi - lo) * static_cast<double>(bins);
    const auto b = static_cast<std::size_t>(
        std::clamp(std::floor(pos), 0.0, static_cast<double>(bins - 1)));
    counts[b] += 1.0;
  }
  const double n = static_cast<double>(samples.size());
  const double norm = 1.0 + alpha * static_cast<double>(bins);
  for (double& c : counts) c = (c / n + alpha) / norm;
  return Histogram(std::move(edges), std::move(counts));
}

double kl_to_midpoint(const Histogram& p, const Histogram& mid) {
  if (p.bin_edges() != mid.bin_edges()) {
    throw ArgumentError("kl_to_midpoint: histograms have different bin edges");
  }
  double sum = 0.0;
  for (std::size_t b = 0; b < p.bins(); ++b) {
    const double pb = p.mass()[b];
    if (pb > 0.0) sum += pb * std::log(pb / mid.mass()[b]);
  }
  return std::max(sum, 0.0);
}

double jsd(const Histogram& p, const Histogram& q) {
  if (p.bin_edges() != q.bin_edges()) {
    throw ArgumentError("jsd: histograms have different bin edges");
  }
  std::vector<double> mid(p.bins());
  for (std::size_t b = 0; b < mid.size(); ++b) mid[b] = 0.5 * (p.mass()[b] + q.mass()[b]);
  const Histogram m(p.bin_edges(), std::move(mid));
  const double a = kl_to_midpoint(p, m);
  const double b = kl_to_midpoint(q, m);
  return 0.5 * (a + b);
}

double sample_jsd(std::span<const double> a, std::span<const double> b, std::size_t bins) {
  if (a.empty() || b.empty()) throw ArgumentError("sample_jsd: empty sample");
  const auto [amin, amax] = std::minmax_element(a.begin(), a.end());
  const auto [bmin, bmax] = std::minmax_element(b.begin(), b.end());
  const double lo = std::min(*amin, *bmin);
  const double hi = std::max(*amax, *bmax);
  if (!(lo < hi)) return 0.0;
  return jsd(build_histogram(a, bins, {lo, hi}), build_histogram(b, bins, {lo, hi}));
}

}  // namespace infgnn
