#include "infgnn/continual.hpp"

#include "infgnn/errors.hpp"

namespace infgnn {

ContinualResult run_continual(const DynamicGraphSequence& seq, const TrainConfig& cfg,
                              const IntervalCallback& on_interval) {
  if (seq.size() < 2) throw ArgumentError("run_continual: need at least two intervals");
  cfg.validate();
  ContinualResult result;
  ModelState state = init_model(cfg.model_config(seq.features()), stream_seed(cfg.seed, 0, "init"));
  MemoryBuffer buffer(cfg.buffer_capacity);
  FisherTable fisher;
  for (std::size_t p = 0; p + 1 < seq.size(); ++p) {
    const IntervalData* prev = p == 0 ? nullptr : &seq[p - 1];
    IntervalOutcome outcome =
        train_interval(std::move(state), prev, seq[p], std::move(buffer), std::move(fisher), cfg);
    if (on_interval) on_interval(p, outcome);
    const auto recs = evaluate_interval(outcome.state, outcome.normalizer, seq[p], seq[p + 1], cfg);
    result.records.insert(result.records.end(), recs.begin(), recs.end());
    result.logs.push_back(std::move(outcome.log));
    state = std::move(outcome.state);
    buffer = std::move(outcome.buffer);
    fisher = std::move(outcome.fisher);
  }
  result.final_state = std::move(state);
  result.final_buffer = std::move(buffer);
  return result;
}

}  // namespace infgnn
