#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "infgnn/graph.hpp"
#include "infgnn/model.hpp"
#include "infgnn/trainer.hpp"

namespace infgnn {

enum class NodeGroup { existing, new_nodes, all };

std::string to_string(NodeGroup g);

struct MetricValues {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mape;  // percent; absent when no entry clears the floor
  std::size_t count = 0;
};

// MAE/RMSE over entries with mask set, MAPE over those with |truth| >= floor.
// Sums run over sorted terms, so any permutation of the entries gives
// bit-identical results. Returns nullopt when the mask selects nothing.
std::optional<MetricValues> compute_metrics(std::span<const double> pred,
                                            std::span<const double> truth,
                                            std::span<const std::uint8_t> mask,
                                            double mape_floor = 1.0);

struct MetricRecord {
  int interval = 0;  // test interval
  NodeGroup group = NodeGroup::all;
  int horizon = 0;
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> mape;
  std::string model_tag;
  std::uint64_t seed = 0;
};

// Raw-unit predictions and ground truth for every test window of one interval.
// Layout: [window][node][feature][step].
struct ForecastSet {
  int interval = 0;
  NodeSet nodes;
  std::size_t features = 0;
  std::size_t horizon = 0;
  std::size_t windows = 0;
  std::vector<double> pred;
  std::vector<double> truth;
};

inline constexpr int kDefaultHorizons[] = {3, 6, 12};

// One record per (group, horizon) with a nonempty group; horizon h pools the
// first h predicted steps. Horizons beyond the forecast length are skipped.
std::vector<MetricRecord> group_breakdown(const ForecastSet& forecast, const NodeChurn& churn,
                                          std::span<const int> horizons,
                                          const std::string& model_tag, std::uint64_t seed,
                                          double mape_floor = 1.0);

// Runs the trained model on the full graph of `test` (test windows only),
// with inputs normalized by the training interval statistics.
ForecastSet forecast_interval(const ModelState& state, const Normalizer& normalizer,
                              const IntervalData& test, const TrainConfig& cfg);

std::vector<MetricRecord> evaluate_interval(const ModelState& state, const Normalizer& normalizer,
                                            const IntervalData& train, const IntervalData& test,
                                            const TrainConfig& cfg);

// metrics.csv with header interval,group,horizon,mae,rmse,mape,model_tag,seed.
// Appends when the file exists; absent MAPE is an empty field.
void append_metrics_csv(const std::vector<MetricRecord>& records, const std::filesystem::path& file);
std::vector<MetricRecord> read_metrics_csv(const std::filesystem::path& file);

// Aligned text table: one block per model tag, rows per group, columns
// MAE/RMSE/MAPE at each horizon, averaged over test intervals.
std::string summary_table(const std::vector<MetricRecord>& records);

// ---------------------------------------------------------------------------
// Baselines

enum class BaselineKind { retrain, expand, knn_kriging };
std::string to_string(BaselineKind k);
BaselineKind baseline_from_string(const std::string& s);

// Plain windowed MSE training on the given graph and features, consuming the
// same data-ordering stream as the continual trainer.
struct PlainOutcome {
  ModelState state;
  Normalizer normalizer;
  std::vector<double> epoch_losses;
  std::vector<std::uint64_t> window_order;
  std::size_t optimizer_steps = 0;
};
PlainOutcome plain_train_interval(ModelState state, const IntervalGraph& graph,
                                  const FeatureTensor& features, const FeatureTensor& stats_source,
                                  const TrainConfig& cfg);

// Series for each node in `unknown` as the mean of its `k` nearest nodes of
// `known` by hop distance in g (ties by NodeId); unreachable nodes fall back
// to the mean of every known node.
FeatureTensor knn_krige(const NodeSet& unknown, const IntervalGraph& g, const NodeSet& known,
                        const FeatureTensor& x, std::size_t k);

std::vector<MetricRecord> run_baseline(BaselineKind kind, const DynamicGraphSequence& seq,
                                       const TrainConfig& cfg, std::size_t knn_k = 3);

// ---------------------------------------------------------------------------
// Ablations and sweeps

// full, wo_sg, wo_ifg, wo_mb, wo_ifs, wo_ris, wo_ewc, trafficstream_like.
TrainConfig apply_ablation(TrainConfig cfg, const std::string& tag);
const std::vector<std::string>& ablation_tags();

std::vector<MetricRecord> run_ablations(const DynamicGraphSequence& seq, const TrainConfig& cfg,
                                        const std::vector<std::string>& which);

// One record set per value; model_tag becomes "<tag>[<param>=<value>]".
std::vector<MetricRecord> run_sweep(const DynamicGraphSequence& seq, const TrainConfig& cfg,
                                    const std::string& param, const std::vector<std::string>& values);

}  // namespace infgnn
