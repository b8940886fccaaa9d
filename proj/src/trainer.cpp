#include "infgnn/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "infgnn/errors.hpp"
#include "infgnn/soft_ri.hpp"

namespace infgnn {

ModelConfig TrainConfig::model_config(std::size_t features) const {
  ModelConfig c;
  c.features = features;
  c.input_steps = input_steps;
  c.horizon = horizon;
  c.hidden1 = hidden1;
  c.hidden2 = hidden2;
  c.conv_width = conv_width;
  c.adjacency = adjacency;
  return c;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError("train config: " + m); };
  if (input_steps == 0 || horizon == 0) fail("input_steps and horizon must be positive");
  if (hidden1 == 0 || hidden2 == 0) fail("hidden sizes must be positive");
  if (conv_width == 0 || conv_width % 2 == 0) fail("conv_width must be odd");
  if (epochs <= 0) fail("epochs must be positive");
  if (pseudo_epochs < 0 || pseudo_epochs >= epochs) fail("pseudo_epochs must satisfy 0 <= N < I");
  if (batch_size == 0) fail("batch_size must be positive");
  if (!(lr >= 0.0)) fail("lr must be >= 0");
  if (buffer_capacity == 0) fail("buffer_capacity must be positive");
  if (!(memory_fraction >= 0.0 && memory_fraction < 1.0)) fail("memory_fraction must be in [0,1)");
  if (sim_set_size == 0) fail("sim_set_size must be positive");
  if (!(damping > 0.0)) fail("damping must be positive");
  if (!(subgraph_fraction > 0.0 && subgraph_fraction <= 1.0)) fail("subgraph_fraction must be in (0,1]");
  if (k_hop <= 0) fail("k_hop must be positive");
  if (!(lambda_ewc >= 0.0) || !(lambda_ris >= 0.0)) fail("lambda weights must be >= 0");
  if (fisher_samples == 0 || ri_block_windows == 0 || ri_blocks == 0) fail("fisher sizes must be positive");
  if (!(train_fraction > 0.0 && test_fraction > 0.0 && train_fraction + test_fraction <= 1.0)) {
    fail("train_fraction and test_fraction must be positive and sum to <= 1");
  }
  if (!(mape_floor >= 0.0)) fail("mape_floor must be >= 0");
}

std::uint64_t stream_seed(std::uint64_t seed, int interval, std::string_view purpose) {
  auto splitmix = [](std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  };
  std::uint64_t h = splitmix(seed);
  h = splitmix(h ^ static_cast<std::uint64_t>(interval));
  for (char c : purpose) h = splitmix(h ^ static_cast<unsigned char>(c));
  return h;
}

// ---------------------------------------------------------------------------
// Normalization and windows

Normalizer Normalizer::fit(const FeatureTensor& x, std::size_t step_end) {
  step_end = std::min(step_end, x.steps());
  if (step_end == 0) throw ArgumentError("Normalizer::fit: empty step range");
  Normalizer out;
  for (std::size_t f = 0; f < x.features(); ++f) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (std::size_t r = 0; r < x.node_count(); ++r) {
      for (std::size_t s = 0; s < step_end; ++s) {
        const double v = x.at(r, f, s);
        sum += v;
        sq += v * v;
        ++n;
      }
    }
    const double mean = sum / static_cast<double>(n);
    const double var = std::max(sq / static_cast<double>(n) - mean * mean, 0.0);
    out.mean.push_back(mean);
    out.scale.push_back(var > 1e-12 ? std::sqrt(var) : 1.0);
  }
  return out;
}

FeatureTensor Normalizer::apply(const FeatureTensor& x) const {
  FeatureTensor out(x.node_order(), x.features(), x.steps());
  for (std::size_t r = 0; r < x.node_count(); ++r) {
    for (std::size_t f = 0; f < x.features(); ++f) {
      for (std::size_t s = 0; s < x.steps(); ++s) {
        out.at(r, f, s) = (x.at(r, f, s) - mean[f]) / scale[f];
      }
    }
  }
  return out;
}

WindowRange train_windows(std::size_t steps, const TrainConfig& cfg) {
  const std::size_t span = cfg.input_steps + cfg.horizon;
  const auto end = static_cast<std::size_t>(std::floor(cfg.train_fraction * static_cast<double>(steps)));
  if (end < span) return {0, 0};
  return {0, end - span + 1};
}

WindowRange test_windows(std::size_t steps, const TrainConfig& cfg) {
  const std::size_t span = cfg.input_steps + cfg.horizon;
  const auto start = static_cast<std::size_t>(
      std::ceil((1.0 - cfg.test_fraction) * static_cast<double>(steps)));
  if (steps < span || start > steps - span) return {0, 0};
  return {start, steps - span + 1};
}

std::vector<Sample> make_windows(const FeatureTensor& x, std::shared_ptr<const Adjacency> graph,
                                 std::size_t input_steps, std::size_t horizon, WindowRange range,
                                 int interval, std::size_t stride) {
  std::vector<Sample> out;
  const std::size_t n = x.node_count(), D = x.features();
  for (std::size_t a = range.first; a < range.last; a += stride) {
    if (a + input_steps + horizon > x.steps()) break;
    Sample s;
    s.timestamp_id = make_timestamp_id(interval, a);
    s.graph = graph;
    s.nodes = n;
    s.input.resize(n * D * input_steps);
    s.target.resize(n * D * horizon);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t f = 0; f < D; ++f) {
        for (std::size_t m = 0; m < input_steps; ++m) {
          s.input[(r * D + f) * input_steps + m] = x.at(r, f, a + m);
        }
        for (std::size_t k = 0; k < horizon; ++k) {
          s.target[(r * D + f) * horizon + k] = x.at(r, f, a + input_steps + k);
        }
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Smoothing terms

std::vector<double> fisher_information(const ModelState& state, std::span<const Sample> data) {
  if (data.empty()) throw ArgumentError("fisher_information: empty sample pool");
  std::vector<double> f(state.params.size(), 0.0);
  for (const Sample& s : data) {
    const LossGradient lg = sample_loss_gradient(state, s);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += lg.gradient[i] * lg.gradient[i];
  }
  for (double& v : f) v /= static_cast<double>(data.size());
  return f;
}

double quadratic_penalty(std::span<const double> params, std::span<const double> weight,
                         std::span<const double> anchor, double lambda) {
  if (weight.size() != params.size() || anchor.size() != params.size()) {
    throw ArgumentError("penalty tables are not aligned with the parameters");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double d = params[i] - anchor[i];
    sum += weight[i] * d * d;
  }
  return lambda * sum;
}

void add_quadratic_penalty_gradient(std::span<const double> params,
                                    std::span<const double> weight,
                                    std::span<const double> anchor, double lambda,
                                    std::span<double> grad) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    grad[i] += 2.0 * lambda * weight[i] * (params[i] - anchor[i]);
  }
}

double ewc_penalty(const ModelState& state, const FisherTable& table, double lambda_ewc) {
  if (!table.anchored() || lambda_ewc == 0.0) return 0.0;
  return quadratic_penalty(state.params, table.loss, table.anchor, lambda_ewc);
}

double ris_penalty(const ModelState& state, const FisherTable& table, double lambda_ris) {
  if (!table.anchored() || lambda_ris == 0.0) return 0.0;
  return quadratic_penalty(state.params, table.ri, table.anchor, lambda_ris);
}

double total_loss(double base, const ModelState& state, const FisherTable& fisher,
                  const TrainConfig& cfg) {
  double total = base;
  if (cfg.use_ewc) total += ewc_penalty(state, fisher, cfg.lambda_ewc);
  if (cfg.use_ris) total += ris_penalty(state, fisher, cfg.lambda_ris);
  return total;
}

// ---------------------------------------------------------------------------
// RI-based Fisher

namespace {

struct RiBlockSetup {
  std::vector<NodeId> nodes;  // subgraph plus neighbours, all persisting
  RiSeries series;
  Adjacency adj_prev, adj_curr;
};

RiBlockSetup make_block_setup(const ModelState& state, const RiFisherInput& in, int k_hop) {
  const NodeSet persisting = set_intersection(in.graph_prev->nodes(), in.graph_curr->nodes());
  const IntervalGraph restricted = induced_subgraph(*in.graph_curr, persisting);
  RiBlockSetup setup;
  std::vector<NodeSet> nbrs;
  NodeSet needed = in.subgraph;
  for (NodeId v : in.subgraph) {
    nbrs.push_back(k_hop_neighbors(restricted, v, k_hop));
    needed.insert(needed.end(), nbrs.back().begin(), nbrs.back().end());
  }
  setup.nodes = make_node_set(std::move(needed));
  auto local = [&](NodeId id) {
    return static_cast<std::size_t>(
        std::lower_bound(setup.nodes.begin(), setup.nodes.end(), id) - setup.nodes.begin());
  };
  setup.series.prev.resize(setup.nodes.size());
  setup.series.curr.resize(setup.nodes.size());
  setup.series.neighbors.resize(setup.nodes.size());
  for (std::size_t i = 0; i < in.subgraph.size(); ++i) {
    const std::size_t v = local(in.subgraph[i]);
    setup.series.targets.push_back(v);
    for (NodeId u : nbrs[i]) setup.series.neighbors[v].push_back(local(u));
  }
  setup.adj_prev = normalize_adjacency(*in.graph_prev, state.config.adjacency);
  setup.adj_curr = normalize_adjacency(*in.graph_curr, state.config.adjacency);
  return setup;
}

struct TileInputs {
  std::vector<std::vector<double>> prev, curr;  // per tile, full-graph input windows
};

std::vector<double> window_input(const FeatureTensor& x, std::size_t anchor, std::size_t M) {
  const std::size_t n = x.node_count(), D = x.features();
  std::vector<double> in(n * D * M);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t f = 0; f < D; ++f) {
      for (std::size_t m = 0; m < M; ++m) in[(r * D + f) * M + m] = x.at(r, f, anchor + m);
    }
  }
  return in;
}

RiBlockValue evaluate_block(const ModelState& state, const RiFisherInput& in,
                            std::size_t first_tile, std::size_t tiles, int k_hop,
                            bool with_gradient) {
  const ModelConfig& c = state.config;
  RiBlockSetup setup = make_block_setup(state, in, k_hop);
  const std::size_t D = c.features, K = c.horizon, M = c.input_steps;
  std::vector<std::size_t> rows_prev, rows_curr;
  for (NodeId id : setup.nodes) {
    rows_prev.push_back(in.x_prev->row_of(id));
    rows_curr.push_back(in.x_curr->row_of(id));
  }
  for (auto& s : setup.series.prev) s.reserve(tiles * D * K);
  for (auto& s : setup.series.curr) s.reserve(tiles * D * K);

  TileInputs inputs;
  for (std::size_t t = first_tile; t < first_tile + tiles; ++t) {
    const std::size_t anchor = t * K;
    inputs.prev.push_back(window_input(*in.x_prev, anchor, M));
    inputs.curr.push_back(window_input(*in.x_curr, anchor, M));
    const auto yp = forward(state, setup.adj_prev, inputs.prev.back());
    const auto yc = forward(state, setup.adj_curr, inputs.curr.back());
    for (std::size_t i = 0; i < setup.nodes.size(); ++i) {
      for (std::size_t q = 0; q < D * K; ++q) {
        setup.series.prev[i].push_back(yp[rows_prev[i] * D * K + q]);
        setup.series.curr[i].push_back(yc[rows_curr[i] * D * K + q]);
      }
    }
  }

  const SoftRiResult ri = soft_relation_importance(setup.series, kDefaultBins, with_gradient);
  RiBlockValue out{ri.mean, {}};
  if (!with_gradient) return out;
  out.gradient.assign(state.params.size(), 0.0);
  for (std::size_t t = 0; t < tiles; ++t) {
    std::vector<double> dprev(setup.adj_prev.size() * D * K, 0.0);
    std::vector<double> dcurr(setup.adj_curr.size() * D * K, 0.0);
    for (std::size_t i = 0; i < setup.nodes.size(); ++i) {
      for (std::size_t q = 0; q < D * K; ++q) {
        dprev[rows_prev[i] * D * K + q] = ri.grad_prev[i][t * D * K + q];
        dcurr[rows_curr[i] * D * K + q] = ri.grad_curr[i][t * D * K + q];
      }
    }
    accumulate_output_vjp(state, setup.adj_prev, inputs.prev[t], dprev, out.gradient);
    accumulate_output_vjp(state, setup.adj_curr, inputs.curr[t], dcurr, out.gradient);
  }
  return out;
}

}  // namespace

std::size_t ri_tile_count(const ModelState& state, std::size_t steps) {
  const std::size_t M = state.config.input_steps, K = state.config.horizon;
  if (steps < M + K) return 0;
  return (steps - M - K) / K + 1;
}

RiBlockValue soft_ri_block(const ModelState& state, const RiFisherInput& in, std::size_t first_tile,
                           std::size_t tiles, int k_hop) {
  return evaluate_block(state, in, first_tile, tiles, k_hop, true);
}

double soft_ri_block_value(const ModelState& state, const RiFisherInput& in,
                           std::size_t first_tile, std::size_t tiles, int k_hop) {
  return evaluate_block(state, in, first_tile, tiles, k_hop, false).value;
}

std::vector<double> ri_fisher(const ModelState& state, const RiFisherInput& in,
                              const TrainConfig& cfg) {
  if (in.subgraph.empty()) throw ArgumentError("ri_fisher: empty subgraph");
  std::vector<double> f(state.params.size(), 0.0);
  const std::size_t tiles =
      std::min(ri_tile_count(state, in.x_prev->steps()), ri_tile_count(state, in.x_curr->steps()));
  if (tiles == 0) return f;
  const std::size_t per_block = std::min(cfg.ri_block_windows, tiles);
  const std::size_t blocks = std::min(cfg.ri_blocks, tiles / per_block);
  for (std::size_t b = 0; b < blocks; ++b) {
    const RiBlockValue v = soft_ri_block(state, in, b * per_block, per_block, cfg.k_hop);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] += v.gradient[i] * v.gradient[i];
  }
  for (double& v : f) v /= static_cast<double>(blocks);
  return f;
}

// ---------------------------------------------------------------------------
// Interval training

namespace {

struct TrainingGraph {
  IntervalGraph graph;
  FeatureTensor features;  // raw units
  NodeSet selected;
  NodeSet simulated;
  std::optional<RiScoreTable> ri;
};

TrainingGraph build_training_graph(const IntervalData* prev, const IntervalData& curr,
                                   const TrainConfig& cfg) {
  const int t = curr.graph.interval_index();
  if (!prev || !cfg.use_subgraph) return {curr.graph, curr.features, {}, {}, std::nullopt};

  RiScoreTable table = score_relation_importance(prev->graph, curr.graph, prev->features,
                                                 curr.features, cfg.k_hop);
  SelectedSubgraph chosen;
  if (cfg.informative_subgraph) {
    chosen = select_informative_subgraph(table, prev->graph, curr.graph, cfg.subgraph_fraction);
  } else {
    std::mt19937_64 rng(stream_seed(cfg.seed, t, "subgraph"));
    chosen = select_random_subgraph(table, prev->graph, curr.graph, cfg.subgraph_fraction, rng);
  }
  const NodeChurn churn = node_churn(prev->graph, curr.graph);
  MergedSubgraph merged =
      neighbors_merge(churn.added, curr.graph, chosen, curr.features, cfg.k_hop);
  return {std::move(merged.graph), std::move(merged.features), chosen.nodes, churn.added,
          std::move(table)};
}

// Per-timestamp running mean of I* over one epoch.
struct ScoreAccumulator {
  std::map<std::uint64_t, std::pair<double, int>> sums;
  std::map<std::uint64_t, Sample> samples;

  void add(const Sample& s, double score) {
    auto& [sum, count] = sums[s.timestamp_id];
    sum += score;
    ++count;
    samples.try_emplace(s.timestamp_id, s);
  }
  std::vector<BufferEntry> averaged() const {
    std::vector<BufferEntry> out;
    for (const auto& [id, sc] : sums) {
      out.push_back({samples.at(id), sc.first / sc.second});
    }
    return out;
  }
};

}  // namespace

IntervalOutcome train_interval(ModelState state, const IntervalData* prev,
                               const IntervalData& curr, MemoryBuffer buffer, FisherTable fisher,
                               const TrainConfig& cfg) {
  cfg.validate();
  const int t = curr.graph.interval_index();
  if (prev && prev->graph.interval_index() >= t) {
    throw ArgumentError("train_interval: intervals are not consecutive");
  }
  IntervalLog log;
  log.interval = t;

  TrainingGraph tg = build_training_graph(prev, curr, cfg);
  log.ri = tg.ri;
  log.selected = tg.selected;
  log.simulated = tg.simulated;
  log.train_nodes = tg.graph.size();

  const std::size_t steps = curr.features.steps();
  const Normalizer norm =
      Normalizer::fit(curr.features, static_cast<std::size_t>(cfg.train_fraction * static_cast<double>(steps)));
  const FeatureTensor train_x = norm.apply(tg.features);
  auto adjacency = std::make_shared<const Adjacency>(normalize_adjacency(tg.graph, cfg.adjacency));
  const std::vector<Sample> windows = make_windows(train_x, adjacency, cfg.input_steps,
                                                   cfg.horizon, train_windows(steps, cfg), t);
  log.train_windows = windows.size();
  if (windows.empty()) throw ConfigError("train_interval: interval too short for one window");

  std::mt19937_64 order_rng(stream_seed(cfg.seed, t, "order"));
  std::mt19937_64 memory_rng(stream_seed(cfg.seed, t, "memory"));
  std::mt19937_64 influence_rng(stream_seed(cfg.seed, t, "influence"));
  if (cfg.use_buffer) {
    if (buffer.capacity() != cfg.buffer_capacity) {
      buffer = update_buffer(buffer, {}, cfg.buffer_capacity, cfg.ranking);
    }
    if (!prev || buffer.empty()) {
      std::mt19937_64 init_rng(stream_seed(cfg.seed, t, "buffer-init"));
      buffer = MemoryBuffer(cfg.buffer_capacity);
      buffer.initialize_random(windows, init_rng);
    }
  }

  const bool ewc_on = cfg.use_ewc && fisher.anchored() && cfg.lambda_ewc != 0.0;
  const bool ris_on = cfg.use_ris && fisher.anchored() && cfg.lambda_ris != 0.0;
  const InfluenceOptions influence_options{
      cfg.hessian == HessianSetting::exact ? HessianMode::exact : HessianMode::diagonal,
      cfg.damping, cfg.exact_parameter_cap};

  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    const bool replay = cfg.use_buffer && !buffer.empty();
    const std::size_t memory_slots =
        replay ? static_cast<std::size_t>(std::lround(cfg.memory_fraction * static_cast<double>(cfg.batch_size)))
               : 0;
    const std::size_t train_slots = std::max<std::size_t>(1, cfg.batch_size - memory_slots);
    const bool score_epoch = cfg.use_buffer && epoch >= cfg.pseudo_epochs;
    ScoreAccumulator scores;
    double loss_sum = 0.0;
    std::size_t loss_batches = 0;

    for (std::size_t start = 0; start < order.size(); start += train_slots) {
      const std::size_t end = std::min(order.size(), start + train_slots);
      Batch batch;
      batch.reserve(end - start + memory_slots);
      for (std::size_t i = start; i < end; ++i) {
        batch.push_back(windows[order[i]]);
        log.window_order.push_back(windows[order[i]].timestamp_id);
      }
      if (memory_slots > 0) {
        const std::size_t draw = std::min(memory_slots, buffer.size());
        for (std::size_t j : draw_indices(buffer.size(), draw, memory_rng)) {
          const Sample& m = buffer.entries()[j].sample;
          const bool clash = std::any_of(batch.begin(), batch.end(), [&](const Sample& s) {
            return s.timestamp_id == m.timestamp_id;
          });
          if (!clash) batch.push_back(m);
        }
      }

      if (score_epoch) {
        std::vector<double> star;
        if (cfg.informative_buffer) {
          const SimulatedTestSets sim =
              sample_simulated_test_sets(buffer, windows, cfg.sim_set_size, influence_rng);
          const SurrogateObjective objective(state);
          InfluenceReport report = combine_influence(
              influence_scores(objective, std::span<const Sample>(batch),
                               std::span<const Sample>(sim.train), influence_options),
              influence_scores(objective, std::span<const Sample>(batch),
                               std::span<const Sample>(sim.memory), influence_options));
          log.gammas.push_back(report.gamma);
          star = std::move(report.i_star);
          ++log.influence_calls;
        } else {
          std::uniform_real_distribution<double> u(0.0, 1.0);
          for (std::size_t j = 0; j < batch.size(); ++j) star.push_back(u(influence_rng));
        }
        for (std::size_t j = 0; j < batch.size(); ++j) scores.add(batch[j], star[j]);
      }

      LossGradient lg = loss_and_gradients(state, batch);
      if (ewc_on) {
        add_quadratic_penalty_gradient(state.params, fisher.loss, fisher.anchor, cfg.lambda_ewc,
                                       lg.gradient);
      }
      if (ris_on) {
        add_quadratic_penalty_gradient(state.params, fisher.ri, fisher.anchor, cfg.lambda_ris,
                                       lg.gradient);
      }
      loss_sum += total_loss(lg.loss, state, fisher, cfg);
      ++loss_batches;
      optimizer_step(state, lg.gradient, cfg.lr);
      ++log.optimizer_steps;
    }

    if (score_epoch) {
      buffer = update_buffer(buffer, scores.averaged(), cfg.buffer_capacity, cfg.ranking);
      for (const BufferEntry& e : buffer.entries()) {
        log.buffer_history.push_back({t, epoch, e.sample.timestamp_id, e.score});
      }
    }
    log.epoch_losses.push_back(loss_sum / static_cast<double>(loss_batches));
  }
  log.final_loss = log.epoch_losses.back();

  // Fresh Fisher table anchored at the end-of-interval parameters.
  FisherTable next;
  next.anchor = state.params;
  next.loss.assign(state.params.size(), 0.0);
  next.ri.assign(state.params.size(), 0.0);
  if (cfg.use_ewc && cfg.lambda_ewc != 0.0) {
    std::vector<Sample> pool;
    if (cfg.fisher_full_graph) {
      auto full_adj =
          std::make_shared<const Adjacency>(normalize_adjacency(curr.graph, cfg.adjacency));
      pool = make_windows(norm.apply(curr.features), full_adj, cfg.input_steps, cfg.horizon,
                          train_windows(steps, cfg), t);
    } else {
      pool = windows;
    }
    std::vector<Sample> picked;
    const std::size_t take = std::min(cfg.fisher_samples, pool.size());
    for (std::size_t i = 0; i < take; ++i) picked.push_back(pool[i * pool.size() / take]);
    next.loss = fisher_information(state, picked);
  }
  if (prev && cfg.use_ris && cfg.lambda_ris != 0.0) {
    const FeatureTensor xp = norm.apply(prev->features);
    const FeatureTensor xc = norm.apply(curr.features);
    NodeSet sub = tg.selected;
    if (sub.empty()) sub = set_intersection(prev->graph.nodes(), curr.graph.nodes());
    next.ri = ri_fisher(state, {&prev->graph, &curr.graph, &xp, &xc, sub}, cfg);
  }

  return {std::move(state), std::move(buffer), std::move(next), norm, std::move(log)};
}

}  // namespace infgnn
