#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "infgnn/distrib.hpp"

namespace infgnn {

// JSD between soft histograms: every sample spreads unit mass over the bins
// with a Gaussian kernel one bin wide, over the shared [min, max] range of
// both samples. Same Laplace smoothing as the hard histogram. When gradient
// spans are non-empty, `upstream` · dJSD/dvalue is added into them
// (including the dependence of the range on the extreme values).
double soft_sample_jsd(std::span<const double> a, std::span<const double> b, std::size_t bins,
                       std::span<double> grad_a = {}, std::span<double> grad_b = {},
                       double upstream = 1.0);

// Relation Importance on arbitrary per-node value series, used to make the
// score a differentiable function of model predictions.
struct RiSeries {
  std::vector<std::vector<double>> prev;        // per node, interval t-1 values
  std::vector<std::vector<double>> curr;        // per node, interval t values
  std::vector<std::vector<std::size_t>> neighbors;
  std::vector<std::size_t> targets;             // nodes averaged into the scalar
};

struct SoftRiResult {
  double mean = 0.0;              // mean RI over targets that have neighbours
  std::vector<double> per_target; // NaN for targets without neighbours
  std::vector<std::vector<double>> grad_prev;  // d mean / d prev values (when requested)
  std::vector<std::vector<double>> grad_curr;
};

SoftRiResult soft_relation_importance(const RiSeries& series, std::size_t bins = kDefaultBins,
                                      bool with_gradient = true);

// Same quantity with hard histograms (no gradient).
SoftRiResult hard_relation_importance(const RiSeries& series, std::size_t bins = kDefaultBins);

}  // namespace infgnn
