#pragma once

#include <functional>
#include <vector>

#include "infgnn/eval.hpp"
#include "infgnn/trainer.hpp"

namespace infgnn {

struct ContinualResult {
  std::vector<MetricRecord> records;
  std::vector<IntervalLog> logs;
  ModelState final_state;
  MemoryBuffer final_buffer;
};

// Called after each training interval, before its evaluation.
using IntervalCallback = std::function<void(std::size_t position, const IntervalOutcome&)>;

// Trains on interval t and evaluates on t+1 without further training, for
// every consecutive pair of the sequence.
ContinualResult run_continual(const DynamicGraphSequence& seq, const TrainConfig& cfg,
                              const IntervalCallback& on_interval = {});

}  // namespace infgnn
