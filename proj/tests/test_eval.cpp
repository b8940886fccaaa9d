#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "infgnn/continual.hpp"
#include "infgnn/eval.hpp"
#include "infgnn/synth.hpp"
#include "support.hpp"

using namespace infgnn;

namespace {

SyntheticDataset tiny_data(int intervals = 3, int growth = 4) {
  SynthConfig sc;
  sc.intervals = intervals;
  sc.initial_nodes = 16;
  sc.growth = growth;
  sc.steps = 200;
  sc.period = 40;
  return generate_synthetic_drift(sc, 9);
}

TrainConfig tiny_train() {
  TrainConfig c;
  c.input_steps = 4;
  c.horizon = 6;
  c.hidden1 = 3;
  c.hidden2 = 3;
  c.epochs = 2;
  c.pseudo_epochs = 1;
  c.batch_size = 16;
  c.buffer_capacity = 12;
  c.sim_set_size = 6;
  c.fisher_samples = 8;
  c.ri_block_windows = 3;
  c.ri_blocks = 1;
  c.subgraph_fraction = 0.3;
  c.seed = 2;
  return c;
}

ForecastSet random_forecast(std::mt19937_64& rng, const NodeSet& nodes, std::size_t windows = 3) {
  ForecastSet f;
  f.interval = 2;
  f.nodes = nodes;
  f.features = 2;
  f.horizon = 12;
  f.windows = windows;
  std::uniform_real_distribution<double> u(0.0, 50.0);
  f.pred.resize(windows * nodes.size() * f.features * f.horizon);
  f.truth.resize(f.pred.size());
  for (auto& v : f.pred) v = u(rng);
  for (auto& v : f.truth) v = u(rng);
  return f;
}

}  // namespace

TEST_CASE("metric examples") {
  const std::vector<double> truth{10, 10}, pred{13, 6};
  const std::vector<std::uint8_t> all{1, 1};
  const auto m = compute_metrics(pred, truth, all);
  REQUIRE(m.has_value());
  CHECK(m->mae == doctest::Approx(3.5));
  CHECK(m->rmse == doctest::Approx(std::sqrt(12.5)));
  REQUIRE(m->mape.has_value());
  CHECK(*m->mape == doctest::Approx(35.0));
  CHECK(m->count == 2);

  const auto perfect = compute_metrics(truth, truth, all);
  CHECK(perfect->mae == 0.0);
  CHECK(perfect->rmse == 0.0);
  CHECK(*perfect->mape == 0.0);

  const std::vector<double> low{0.5, 0.2};
  const auto floor = compute_metrics(pred, low, all);
  REQUIRE(floor.has_value());
  CHECK_FALSE(floor->mape.has_value());
  CHECK(floor->mae > 0.0);

  const std::vector<std::uint8_t> none{0, 0};
  CHECK_FALSE(compute_metrics(pred, truth, none).has_value());
  const std::vector<std::uint8_t> first{1, 0};
  CHECK(compute_metrics(pred, truth, first)->mae == 3.0);
  CHECK_THROWS_AS(compute_metrics(pred, std::vector<double>{1}, all), ArgumentError);
}

TEST_CASE("metrics are permutation invariant and MAE never exceeds RMSE") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g(20.0, 15.0);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> p(97), q(97);
    for (auto& v : p) v = g(rng);
    for (auto& v : q) v = g(rng);
    const std::vector<std::uint8_t> mask(97, 1);
    const auto a = compute_metrics(p, q, mask);
    std::vector<std::size_t> perm(97);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> pp(97), qq(97);
    for (std::size_t i = 0; i < 97; ++i) pp[i] = p[perm[i]], qq[i] = q[perm[i]];
    const auto b = compute_metrics(pp, qq, mask);
    CHECK(a->mae == b->mae);
    CHECK(a->rmse == b->rmse);
    CHECK(*a->mape == *b->mape);
    CHECK(a->mae <= a->rmse);
  }
}

TEST_CASE("group breakdown") {
  std::mt19937_64 rng(1);
  const NodeSet nodes = testing::ids({1, 2, 3, 4, 5});
  const ForecastSet f = random_forecast(rng, nodes);
  NodeChurn churn{testing::ids({1, 2, 3}), testing::ids({4, 5}), {}};
  const auto recs = group_breakdown(f, churn, kDefaultHorizons, "m", 7);
  CHECK(recs.size() == 9);
  for (const auto& r : recs) {
    CHECK(r.mae <= r.rmse);
    CHECK(r.model_tag == "m");
    CHECK(r.seed == 7);
    CHECK(r.interval == 2);
  }
  auto find = [&](NodeGroup g, int h) {
    for (const auto& r : recs)
      if (r.group == g && r.horizon == h) return r;
    FAIL("record missing");
    return MetricRecord{};
  };

  // Oracle: gather the entries of each group and horizon by hand.
  const std::size_t n = nodes.size(), D = f.features, K = f.horizon;
  for (int h : kDefaultHorizons) {
    std::vector<double> pe, te, pn, tn;
    for (std::size_t w = 0; w < f.windows; ++w)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < D; ++d)
          for (std::size_t s = 0; s < static_cast<std::size_t>(h); ++s) {
            const std::size_t at = ((w * n + i) * D + d) * K + s;
            (i < 3 ? pe : pn).push_back(f.pred[at]);
            (i < 3 ? te : tn).push_back(f.truth[at]);
          }
    const auto existing = compute_metrics(pe, te, std::vector<std::uint8_t>(pe.size(), 1));
    const auto fresh = compute_metrics(pn, tn, std::vector<std::uint8_t>(pn.size(), 1));
    std::vector<double> pa = pe, ta = te;
    pa.insert(pa.end(), pn.begin(), pn.end());
    ta.insert(ta.end(), tn.begin(), tn.end());
    const auto pooled = compute_metrics(pa, ta, std::vector<std::uint8_t>(pa.size(), 1));
    CHECK(find(NodeGroup::existing, h).mae == existing->mae);
    CHECK(find(NodeGroup::new_nodes, h).rmse == fresh->rmse);
    const MetricRecord all = find(NodeGroup::all, h);
    CHECK(all.mae == pooled->mae);  // bit-exact
    CHECK(all.rmse == pooled->rmse);
    CHECK(*all.mape == *pooled->mape);
    CHECK(all.mae >= std::min(existing->mae, fresh->mae));
    CHECK(all.mae <= std::max(existing->mae, fresh->mae));
  }

  const NodeChurn no_new{nodes, {}, {}};
  const auto only = group_breakdown(f, no_new, kDefaultHorizons, "m", 7);
  CHECK(only.size() == 6);
  for (const auto& r : only) CHECK(r.group != NodeGroup::new_nodes);

  ForecastSet short_f = f;
  short_f.horizon = 6;
  short_f.pred.resize(f.windows * n * D * 6);
  short_f.truth.resize(short_f.pred.size());
  const auto limited = group_breakdown(short_f, churn, kDefaultHorizons, "m", 7);
  for (const auto& r : limited) CHECK(r.horizon <= 6);
  CHECK(limited.size() == 6);
}

TEST_CASE("metrics csv round trip and summary") {
  const auto dir = testing::temp_dir("metrics");
  std::vector<MetricRecord> recs{{2, NodeGroup::all, 3, 1.5, 2.25, 12.5, "full", 1},
                                 {2, NodeGroup::new_nodes, 12, 0.125, 0.5, std::nullopt, "full", 1}};
  append_metrics_csv(recs, dir / "metrics.csv");
  append_metrics_csv({recs[0]}, dir / "metrics.csv");
  std::ifstream in(dir / "metrics.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "interval,group,horizon,mae,rmse,mape,model_tag,seed");
  const auto back = read_metrics_csv(dir / "metrics.csv");
  REQUIRE(back.size() == 3);
  CHECK(back[1].group == NodeGroup::new_nodes);
  CHECK(back[1].horizon == 12);
  CHECK(back[1].mae == 0.125);
  CHECK_FALSE(back[1].mape.has_value());
  CHECK(*back[2].mape == 12.5);
  const std::string table = summary_table(back);
  CHECK(table.find("full") != std::string::npos);
  CHECK(table.find("new") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("k-nearest kriging") {
  // Path 1 - 2 - 3 - 4, node 9 isolated.
  const NodeSet nodes = testing::ids({1, 2, 3, 4, 9});
  const IntervalGraph g(1, nodes, {{NodeId(1), NodeId(2), 1}, {NodeId(2), NodeId(3), 1}, {NodeId(3), NodeId(4), 1}});
  FeatureTensor x(nodes, 1, 3);
  for (std::size_t r = 0; r < nodes.size(); ++r)
    for (std::size_t s = 0; s < 3; ++s) x.at(r, 0, s) = 10.0 * static_cast<double>(r + 1) + static_cast<double>(s);
  const NodeSet known = testing::ids({2, 3, 4});
  const FeatureTensor k1 = knn_krige(testing::ids({1}), g, known, x, 1);
  for (std::size_t s = 0; s < 3; ++s) CHECK(k1.at(0, 0, s) == x.at(1, 0, s));
  const FeatureTensor k2 = knn_krige(testing::ids({1}), g, known, x, 2);
  CHECK(k2.at(0, 0, 0) == doctest::Approx(25.0));
  const FeatureTensor iso = knn_krige(testing::ids({9}), g, known, x, 1);
  CHECK(iso.at(0, 0, 0) == doctest::Approx(30.0));  // mean of every known node
  CHECK_THROWS_AS(knn_krige(testing::ids({1}), g, known, x, 0), ArgumentError);
}

TEST_CASE("ablation presets") {
  const TrainConfig base = tiny_train();
  CHECK_FALSE(apply_ablation(base, "wo_sg").use_subgraph);
  CHECK_FALSE(apply_ablation(base, "wo_ifg").informative_subgraph);
  CHECK_FALSE(apply_ablation(base, "wo_mb").use_buffer);
  CHECK_FALSE(apply_ablation(base, "wo_ifs").informative_buffer);
  CHECK_FALSE(apply_ablation(base, "wo_ris").use_ris);
  CHECK_FALSE(apply_ablation(base, "wo_ewc").use_ewc);
  const TrainConfig ts = apply_ablation(base, "trafficstream_like");
  CHECK_FALSE(ts.informative_subgraph);
  CHECK_FALSE(ts.informative_buffer);
  CHECK(apply_ablation(base, "full").model_tag == "full");
  CHECK_THROWS_AS(apply_ablation(base, "wo_everything"), ConfigError);
  CHECK(ablation_tags().size() == 8);
  CHECK(baseline_from_string("expand") == BaselineKind::expand);
  CHECK_THROWS_AS(baseline_from_string("gru"), ConfigError);
}

TEST_CASE("continual protocol") {
  const SyntheticDataset data = tiny_data();
  const auto& seq = data.sequence;
  const TrainConfig cfg = tiny_train();

  SUBCASE("every pair is trained then evaluated") {
    std::vector<std::size_t> seen;
    const ContinualResult r = run_continual(seq, cfg, [&](std::size_t p, const IntervalOutcome&) { seen.push_back(p); });
    CHECK(seen == std::vector<std::size_t>{0, 1});
    CHECK(r.logs.size() == 2);
    std::set<int> intervals;
    for (const auto& rec : r.records) {
      intervals.insert(rec.interval);
      CHECK(rec.mae <= rec.rmse);
      CHECK(std::isfinite(rec.mae));
    }
    CHECK(intervals == std::set<int>{seq[1].graph.interval_index(), seq[2].graph.interval_index()});
  }
  SUBCASE("without the buffer no influence is computed") {
    const ContinualResult r = run_continual(seq, apply_ablation(cfg, "wo_mb"));
    for (const auto& log : r.logs) {
      CHECK(log.influence_calls == 0);
      CHECK(log.buffer_history.empty());
    }
  }
  SUBCASE("random subgraph keeps the informative size") {
    const ContinualResult a = run_continual(seq, cfg);
    const ContinualResult b = run_continual(seq, apply_ablation(cfg, "wo_ifg"));
    const ContinualResult c = run_continual(seq, apply_ablation(cfg, "wo_ifg"));
    CHECK(a.logs[1].selected.size() == b.logs[1].selected.size());
    CHECK(b.logs[1].selected == c.logs[1].selected);
    CHECK(is_subset(b.logs[1].selected, node_churn(seq[0].graph, seq[1].graph).persisting));
  }
  SUBCASE("buffer sweep emits one record set per value") {
    const auto recs = run_sweep(seq, cfg, "buffer_capacity", {"8", "10", "12"});
    std::set<std::string> tags;
    for (const auto& r : recs) tags.insert(r.model_tag);
    CHECK(tags == std::set<std::string>{"inf-gnn[buffer_capacity=8]", "inf-gnn[buffer_capacity=10]",
                                        "inf-gnn[buffer_capacity=12]"});
  }
}

TEST_CASE("baselines") {
  const TrainConfig cfg = tiny_train();
  SUBCASE("retrain on two intervals runs one cycle") {
    const SyntheticDataset data = tiny_data(2);
    const auto recs = run_baseline(BaselineKind::retrain, data.sequence, cfg);
    REQUIRE_FALSE(recs.empty());
    for (const auto& r : recs) {
      CHECK(r.interval == data.sequence[1].graph.interval_index());
      CHECK(r.model_tag == "retrain");
    }
  }
  SUBCASE("expand without new nodes evaluates the previous model") {
    const SyntheticDataset data = tiny_data(3, 0);
    const auto& seq = data.sequence;
    REQUIRE(node_churn(seq[0].graph, seq[1].graph).added.empty());
    const auto recs = run_baseline(BaselineKind::expand, seq, cfg);
    const ModelState s0 = init_model(cfg.model_config(seq.features()), stream_seed(cfg.seed, 0, "init"));
    const PlainOutcome first = plain_train_interval(s0, seq[0].graph, seq[0].features, seq[0].features, cfg);
    const Normalizer norm = Normalizer::fit(seq[1].features, static_cast<std::size_t>(cfg.train_fraction * 200));
    auto want = evaluate_interval(first.state, norm, seq[1], seq[2], cfg);
    std::vector<MetricRecord> got;
    for (const auto& r : recs)
      if (r.interval == seq[2].graph.interval_index()) got.push_back(r);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].mae == want[i].mae);
  }
  SUBCASE("kriging and expand run with new nodes") {
    const SyntheticDataset data = tiny_data(3);
    CHECK_FALSE(run_baseline(BaselineKind::knn_kriging, data.sequence, cfg, 1).empty());
    CHECK_FALSE(run_baseline(BaselineKind::expand, data.sequence, cfg).empty());
  }
}
