#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace infgnn {

inline constexpr std::size_t kDefaultBins = 64;
inline constexpr double kLaplaceAlpha = 1e-6;

// Discrete distribution over equal-width bins. Mass sums to 1 within 1e-9.
class Histogram {
 public:
  Histogram(std::vector<double> bin_edges, std::vector<double> mass);

  const std::vector<double>& bin_edges() const { return bin_edges_; }
  const std::vector<double>& mass() const { return mass_; }
  std::size_t bins() const { return mass_.size(); }

 private:
  std::vector<double> bin_edges_;
  std::vector<double> mass_;
};

// Equal-width counts over [lo, hi] (out-of-range samples clipped into the
// boundary bins), Laplace-smoothed by `alpha` per bin, then normalized.
Histogram build_histogram(std::span<const double> samples, std::size_t bins,
                          std::pair<double, double> range, double alpha = kLaplaceAlpha);

// Σ p log(p / mid) in nats.
double kl_to_midpoint(const Histogram& p, const Histogram& mid);

// ½ KL(p‖m) + ½ KL(q‖m), m = (p+q)/2. Symmetric bit-for-bit.
double jsd(const Histogram& p, const Histogram& q);

// JSD of two raw samples over the shared [min, max] of their union. Returns 0
// when both samples are the same constant.
double sample_jsd(std::span<const double> a, std::span<const double> b,
                  std::size_t bins = kDefaultBins);

}  // namespace infgnn
