#include "infgnn/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "infgnn/config_io.hpp"
#include "infgnn/continual.hpp"
#include "infgnn/errors.hpp"

namespace infgnn {

std::string to_string(NodeGroup g) {
  switch (g) {
    case NodeGroup::existing: return "existing";
    case NodeGroup::new_nodes: return "new";
    case NodeGroup::all: return "all";
  }
  return "all";
}

namespace {

NodeGroup group_from_string(const std::string& s) {
  if (s == "existing") return NodeGroup::existing;
  if (s == "new") return NodeGroup::new_nodes;
  if (s == "all") return NodeGroup::all;
  throw FormatError("unknown node group '" + s + "'");
}

double sorted_sum(std::vector<double>& v) {
  std::sort(v.begin(), v.end());
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

std::optional<MetricValues> compute_metrics(std::span<const double> pred,
                                            std::span<const double> truth,
                                            std::span<const std::uint8_t> mask,
                                            double mape_floor) {
  if (pred.size() != truth.size() || mask.size() != pred.size()) {
    throw ArgumentError("compute_metrics: shape mismatch");
  }
  std::vector<double> abs_err, sq_err, rel_err;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    const double e = pred[i] - truth[i];
    abs_err.push_back(std::abs(e));
    sq_err.push_back(e * e);
    if (std::abs(truth[i]) >= mape_floor) rel_err.push_back(std::abs(e) / std::abs(truth[i]));
  }
  if (abs_err.empty()) return std::nullopt;
  MetricValues m;
  m.count = abs_err.size();
  const double n = static_cast<double>(m.count);
  m.mae = sorted_sum(abs_err) / n;
  m.rmse = std::sqrt(sorted_sum(sq_err) / n);
  if (!rel_err.empty()) m.mape = 100.0 * sorted_sum(rel_err) / static_cast<double>(rel_err.size());
  return m;
}

std::vector<MetricRecord> group_breakdown(const ForecastSet& f, const NodeChurn& churn,
                                          std::span<const int> horizons,
                                          const std::string& model_tag, std::uint64_t seed,
                                          double mape_floor) {
  const std::size_t n = f.nodes.size(), D = f.features, K = f.horizon;
  if (f.pred.size() != f.windows * n * D * K || f.truth.size() != f.pred.size()) {
    throw ArgumentError("group_breakdown: forecast arrays do not match their shape");
  }
  std::vector<MetricRecord> out;
  const std::pair<NodeGroup, const NodeSet*> groups[] = {
      {NodeGroup::existing, &churn.persisting},
      {NodeGroup::new_nodes, &churn.added},
      {NodeGroup::all, &f.nodes},
  };
  for (const auto& [group, members] : groups) {
    std::vector<std::uint8_t> in_group(n, 0);
    for (std::size_t r = 0; r < n; ++r) {
      in_group[r] = std::binary_search(members->begin(), members->end(), f.nodes[r]) ? 1 : 0;
    }
    for (int h : horizons) {
      if (h <= 0 || static_cast<std::size_t>(h) > K) continue;
      std::vector<std::uint8_t> mask(f.pred.size(), 0);
      for (std::size_t w = 0; w < f.windows; ++w) {
        for (std::size_t r = 0; r < n; ++r) {
          if (!in_group[r]) continue;
          for (std::size_t d = 0; d < D; ++d) {
            const std::size_t base = ((w * n + r) * D + d) * K;
            for (int k = 0; k < h; ++k) mask[base + static_cast<std::size_t>(k)] = 1;
          }
        }
      }
      const auto m = compute_metrics(f.pred, f.truth, mask, mape_floor);
      if (!m) continue;
      out.push_back({f.interval, group, h, m->mae, m->rmse, m->mape, model_tag, seed});
    }
  }
  return out;
}

ForecastSet forecast_interval(const ModelState& state, const Normalizer& normalizer,
                              const IntervalData& test, const TrainConfig& cfg) {
  const std::size_t M = state.config.input_steps, K = state.config.horizon;
  const std::size_t D = test.features.features();
  if (D != state.config.features) {
    throw ArgumentError("forecast_interval: model expects " + std::to_string(state.config.features) +
                        " features, data has " + std::to_string(D));
  }
  const FeatureTensor& raw = test.features;
  const FeatureTensor x = normalizer.apply(raw);
  const Adjacency adj = normalize_adjacency(test.graph, state.config.adjacency);
  const WindowRange range = test_windows(raw.steps(), cfg);
  const std::size_t n = raw.node_count();

  ForecastSet f;
  f.interval = test.graph.interval_index();
  f.nodes = test.graph.nodes();
  f.features = D;
  f.horizon = K;
  std::vector<double> input(n * D * M);
  for (std::size_t a = range.first; a < range.last; ++a) {
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t m = 0; m < M; ++m) input[(r * D + d) * M + m] = x.at(r, d, a + m);
      }
    }
    const std::vector<double> y = forward(state, adj, input);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t k = 0; k < K; ++k) {
          f.pred.push_back(normalizer.invert(y[(r * D + d) * K + k], d));
          f.truth.push_back(raw.at(r, d, a + M + k));
        }
      }
    }
    ++f.windows;
  }
  return f;
}

std::vector<MetricRecord> evaluate_interval(const ModelState& state, const Normalizer& normalizer,
                                            const IntervalData& train, const IntervalData& test,
                                            const TrainConfig& cfg) {
  const ForecastSet f = forecast_interval(state, normalizer, test, cfg);
  return group_breakdown(f, node_churn(train.graph, test.graph), kDefaultHorizons, cfg.model_tag,
                         cfg.seed, cfg.mape_floor);
}

void append_metrics_csv(const std::vector<MetricRecord>& records,
                        const std::filesystem::path& file) {
  const bool fresh = !std::filesystem::exists(file) || std::filesystem::file_size(file) == 0;
  std::ofstream out(file, std::ios::app | std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.precision(10);
  if (fresh) out << "interval,group,horizon,mae,rmse,mape,model_tag,seed\n";
  for (const MetricRecord& r : records) {
    out << r.interval << ',' << to_string(r.group) << ',' << r.horizon << ',' << r.mae << ','
        << r.rmse << ',';
    if (r.mape) out << *r.mape;
    out << ',' << r.model_tag << ',' << r.seed << '\n';
  }
}

std::vector<MetricRecord> read_metrics_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw FormatError("cannot read " + file.string());
  std::string line;
  std::getline(in, line);
  if (line != "interval,group,horizon,mae,rmse,mape,model_tag,seed") {
    throw FormatError(file.string() + ": unexpected header");
  }
  std::vector<MetricRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() == 7 && line.back() == ',') cells.emplace_back();
    if (cells.size() != 8) throw FormatError(file.string() + ": malformed row '" + line + "'");
    MetricRecord r;
    r.interval = std::stoi(cells[0]);
    r.group = group_from_string(cells[1]);
    r.horizon = std::stoi(cells[2]);
    r.mae = std::stod(cells[3]);
    r.rmse = std::stod(cells[4]);
    if (!cells[5].empty()) r.mape = std::stod(cells[5]);
    r.model_tag = cells[6];
    r.seed = std::stoull(cells[7]);
    out.push_back(std::move(r));
  }
  return out;
}

std::string summary_table(const std::vector<MetricRecord>& records) {
  struct Acc {
    double mae = 0, rmse = 0, mape = 0;
    int n = 0, n_mape = 0;
  };
  std::vector<std::string> tags;
  std::map<std::tuple<std::string, NodeGroup, int>, Acc> acc;
  std::vector<int> horizons;
  for (const MetricRecord& r : records) {
    if (std::find(tags.begin(), tags.end(), r.model_tag) == tags.end()) tags.push_back(r.model_tag);
    if (std::find(horizons.begin(), horizons.end(), r.horizon) == horizons.end()) {
      horizons.push_back(r.horizon);
    }
    Acc& a = acc[{r.model_tag, r.group, r.horizon}];
    a.mae += r.mae;
    a.rmse += r.rmse;
    ++a.n;
    if (r.mape) {
      a.mape += *r.mape;
      ++a.n_mape;
    }
  }
  std::sort(horizons.begin(), horizons.end());

  std::size_t tag_width = 9;
  for (const auto& t : tags) tag_width = std::max(tag_width, t.size());
  std::ostringstream os;
  char buf[128];
  std::snprintf(buf, sizeof buf, "%-*s  %-8s", static_cast<int>(tag_width), "model", "group");
  os << buf;
  for (int h : horizons) {
    std::snprintf(buf, sizeof buf, " | h=%-2d %8s %8s %8s", h, "MAE", "RMSE", "MAPE%");
    os << buf;
  }
  os << '\n';
  for (const std::string& tag : tags) {
    for (NodeGroup g : {NodeGroup::all, NodeGroup::existing, NodeGroup::new_nodes}) {
      bool any = false;
      for (int h : horizons) any = any || acc.count({tag, g, h});
      if (!any) continue;
      std::snprintf(buf, sizeof buf, "%-*s  %-8s", static_cast<int>(tag_width), tag.c_str(),
                    to_string(g).c_str());
      os << buf;
      for (int h : horizons) {
        auto it = acc.find({tag, g, h});
        if (it == acc.end()) {
          std::snprintf(buf, sizeof buf, " | %4s %8s %8s %8s", "", "-", "-", "-");
        } else {
          const Acc& a = it->second;
          char mape[32] = "-";
          if (a.n_mape) std::snprintf(mape, sizeof mape, "%.2f", a.mape / a.n_mape);
          std::snprintf(buf, sizeof buf, " | %4s %8.3f %8.3f %8s", "", a.mae / a.n, a.rmse / a.n,
                        mape);
        }
        os << buf;
      }
      os << '\n';
    }
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Baselines

std::string to_string(BaselineKind k) {
  switch (k) {
    case BaselineKind::retrain: return "retrain";
    case BaselineKind::expand: return "expand";
    case BaselineKind::knn_kriging: return "knn_kriging";
  }
  return "retrain";
}

BaselineKind baseline_from_string(const std::string& s) {
  if (s == "retrain") return BaselineKind::retrain;
  if (s == "expand") return BaselineKind::expand;
  if (s == "knn_kriging") return BaselineKind::knn_kriging;
  throw ConfigError("unknown baseline '" + s + "' (expected retrain, expand or knn_kriging)");
}

PlainOutcome plain_train_interval(ModelState state, const IntervalGraph& graph,
                                  const FeatureTensor& features, const FeatureTensor& stats_source,
                                  const TrainConfig& cfg) {
  const int t = graph.interval_index();
  const std::size_t steps = stats_source.steps();
  PlainOutcome out{std::move(state), {}, {}, {}, 0};
  out.normalizer = Normalizer::fit(
      stats_source, static_cast<std::size_t>(cfg.train_fraction * static_cast<double>(steps)));
  const FeatureTensor x = out.normalizer.apply(features);
  auto adj = std::make_shared<const Adjacency>(normalize_adjacency(graph, cfg.adjacency));
  const std::vector<Sample> windows =
      make_windows(x, adj, cfg.input_steps, cfg.horizon, train_windows(steps, cfg), t);
  if (windows.empty()) return out;

  std::mt19937_64 rng(stream_seed(cfg.seed, t, "order"));
  std::vector<std::size_t> order(windows.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      Batch batch;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i) {
        batch.push_back(windows[order[i]]);
        out.window_order.push_back(windows[order[i]].timestamp_id);
      }
      const LossGradient lg = loss_and_gradients(out.state, batch);
      sum += lg.loss;
      ++batches;
      optimizer_step(out.state, lg.gradient, cfg.lr);
      ++out.optimizer_steps;
    }
    out.epoch_losses.push_back(sum / static_cast<double>(batches));
  }
  return out;
}

FeatureTensor knn_krige(const NodeSet& unknown, const IntervalGraph& g, const NodeSet& known,
                        const FeatureTensor& x, std::size_t k) {
  if (k == 0) throw ArgumentError("knn_krige: k must be positive");
  if (known.empty()) throw ArgumentError("knn_krige: no known nodes");
  const std::size_t width = x.features() * x.steps();
  FeatureTensor out(unknown, x.features(), x.steps());
  for (std::size_t r = 0; r < unknown.size(); ++r) {
    const std::vector<int> dist = hop_distances(g, unknown[r]);
    std::vector<std::pair<int, NodeId>> cand;
    for (NodeId u : known) {
      if (u == unknown[r] || !g.contains(u)) continue;
      const int d = dist[g.index_of(u)];
      if (d > 0) cand.emplace_back(d, u);
    }
    std::sort(cand.begin(), cand.end());
    std::vector<NodeId> picked;
    if (cand.empty()) {
      picked = known;
    } else {
      for (std::size_t i = 0; i < std::min(k, cand.size()); ++i) picked.push_back(cand[i].second);
    }
    auto dst = out.node_values(r);
    std::fill(dst.begin(), dst.end(), 0.0);
    for (NodeId u : picked) {
      const auto src = x.node_values(x.row_of(u));
      for (std::size_t i = 0; i < width; ++i) dst[i] += src[i];
    }
    for (double& v : dst) v /= static_cast<double>(picked.size());
  }
  return out;
}

std::vector<MetricRecord> run_baseline(BaselineKind kind, const DynamicGraphSequence& seq,
                                       const TrainConfig& cfg_in, std::size_t knn_k) {
  if (seq.size() < 2) throw ArgumentError("run_baseline: need at least two intervals");
  TrainConfig cfg = cfg_in;
  cfg.model_tag = to_string(kind);
  cfg.validate();
  ModelState state = init_model(cfg.model_config(seq.features()), stream_seed(cfg.seed, 0, "init"));
  std::vector<MetricRecord> records;
  for (std::size_t p = 0; p + 1 < seq.size(); ++p) {
    const IntervalData& curr = seq[p];
    PlainOutcome outcome;
    if (p == 0 || kind == BaselineKind::retrain) {
      outcome = plain_train_interval(std::move(state), curr.graph, curr.features, curr.features, cfg);
    } else {
      const NodeChurn churn = node_churn(seq[p - 1].graph, curr.graph);
      if (kind == BaselineKind::expand) {
        if (churn.added.empty()) {
          outcome.state = std::move(state);
          outcome.normalizer = Normalizer::fit(
              curr.features, static_cast<std::size_t>(cfg.train_fraction *
                                                      static_cast<double>(curr.features.steps())));
        } else {
          outcome = plain_train_interval(std::move(state),
                                         induced_subgraph(curr.graph, churn.added),
                                         crop_features(curr.features, churn.added), curr.features,
                                         cfg);
        }
      } else {
        FeatureTensor combined = curr.features;
        if (!churn.added.empty()) {
          const FeatureTensor kriged =
              knn_krige(churn.added, curr.graph, churn.persisting, curr.features, knn_k);
          for (std::size_t r = 0; r < kriged.node_count(); ++r) {
            const auto src = kriged.node_values(r);
            auto dst = combined.node_values(combined.row_of(kriged.node_order()[r]));
            std::copy(src.begin(), src.end(), dst.begin());
          }
        }
        outcome = plain_train_interval(std::move(state), curr.graph, combined, curr.features, cfg);
      }
    }
    const auto recs = evaluate_interval(outcome.state, outcome.normalizer, curr, seq[p + 1], cfg);
    records.insert(records.end(), recs.begin(), recs.end());
    state = std::move(outcome.state);
  }
  return records;
}

// ---------------------------------------------------------------------------
// Ablations

const std::vector<std::string>& ablation_tags() {
  static const std::vector<std::string> tags = {"full",   "wo_sg",  "wo_ifg", "wo_mb",
                                                "wo_ifs", "wo_ris", "wo_ewc", "trafficstream_like"};
  return tags;
}

TrainConfig apply_ablation(TrainConfig cfg, const std::string& tag) {
  if (tag == "full") {
  } else if (tag == "wo_sg") {
    cfg.use_subgraph = false;
  } else if (tag == "wo_ifg") {
    cfg.informative_subgraph = false;
  } else if (tag == "wo_mb") {
    cfg.use_buffer = false;
  } else if (tag == "wo_ifs") {
    cfg.informative_buffer = false;
  } else if (tag == "wo_ris") {
    cfg.use_ris = false;
  } else if (tag == "wo_ewc") {
    cfg.use_ewc = false;
  } else if (tag == "trafficstream_like") {
    cfg.informative_subgraph = false;
    cfg.informative_buffer = false;
  } else {
    throw ConfigError("unknown ablation '" + tag + "'");
  }
  cfg.model_tag = tag;
  return cfg;
}

std::vector<MetricRecord> run_ablations(const DynamicGraphSequence& seq, const TrainConfig& cfg,
                                        const std::vector<std::string>& which) {
  std::vector<MetricRecord> records;
  for (const std::string& tag : which) {
    const auto r = run_continual(seq, apply_ablation(cfg, tag)).records;
    records.insert(records.end(), r.begin(), r.end());
  }
  return records;
}

std::vector<MetricRecord> run_sweep(const DynamicGraphSequence& seq, const TrainConfig& cfg,
                                    const std::string& param,
                                    const std::vector<std::string>& values) {
  std::vector<MetricRecord> records;
  for (const std::string& v : values) {
    TrainConfig arm = cfg;
    set_config_value(arm, param, v);
    arm.model_tag = cfg.model_tag + "[" + param + "=" + v + "]";
    const auto r = run_continual(seq, arm).records;
    records.insert(records.end(), r.begin(), r.end());
  }
  return records;
}

}  // namespace infgnn
