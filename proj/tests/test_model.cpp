#include <doctest.h>

#include <cmath>
#include <fstream>

#include "infgnn/checkpoint.hpp"
#include "infgnn/errors.hpp"
#include "infgnn/model.hpp"
#include "support.hpp"

using namespace infgnn;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.features = 2;
  c.input_steps = 4;
  c.horizon = 3;
  c.hidden1 = 3;
  c.hidden2 = 2;
  return c;
}

// Straight dense implementation of the surrogate, used as the oracle.
std::vector<double> naive_forward(const ModelState& s, const std::vector<double>& a,
                                  std::size_t n, const std::vector<double>& x) {
  const ModelConfig& c = s.config;
  const ParamLayout L(c);
  const auto& p = s.params;
  const std::size_t D = c.features, M = c.input_steps, K = c.horizon;
  const std::size_t H1 = c.hidden1, H2 = c.hidden2, W = c.conv_width;
  const auto relu = [](double v) { return v > 0 ? v : 0.0; };
  std::vector<double> h1(n * M * H1), h2(n * M * H1), h3(n * M * H2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t h = 0; h < H1; ++h) {
        double z = 0;
        for (std::size_t d = 0; d < D; ++d) {
          double agg = 0;
          for (std::size_t j = 0; j < n; ++j) agg += a[i * n + j] * x[(j * D + d) * M + m];
          z += agg * p[L.gnn1_neighbor + d * H1 + h] + x[(i * D + d) * M + m] * p[L.gnn1_self + d * H1 + h];
        }
        h1[(i * M + m) * H1 + h] = relu(z);
      }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t h = 0; h < H1; ++h) {
        double z = p[L.conv_bias + h];
        for (std::size_t j = 0; j < W; ++j) {
          const long src = static_cast<long>(m + j) - static_cast<long>(W / 2);
          if (src < 0 || src >= static_cast<long>(M)) continue;
          z += p[L.conv_kernel + j * H1 + h] * h1[(i * M + static_cast<std::size_t>(src)) * H1 + h];
        }
        h2[(i * M + m) * H1 + h] = relu(z);
      }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t m = 0; m < M; ++m)
      for (std::size_t o = 0; o < H2; ++o) {
        double z = 0;
        for (std::size_t h = 0; h < H1; ++h) {
          double agg = 0;
          for (std::size_t j = 0; j < n; ++j) agg += a[i * n + j] * h2[(j * M + m) * H1 + h];
          z += agg * p[L.gnn2_neighbor + h * H2 + o] + h2[(i * M + m) * H1 + h] * p[L.gnn2_self + h * H2 + o];
        }
        h3[(i * M + m) * H2 + o] = relu(z);
      }
  std::vector<double> y(n * D * K);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < D * K; ++o) {
      double v = p[L.head_bias + o];
      for (std::size_t f = 0; f < M * H2; ++f) v += h3[i * M * H2 + f] * p[L.head_weight + f * D * K + o];
      y[i * D * K + o] = v;
    }
  return y;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("parameter count") {
  const ModelConfig c = small_config();
  const std::size_t want = 2 * 2 * 3 + 3 * 3 + 3 + 2 * 3 * 2 + 4 * 2 * 2 * 3 + 2 * 3;
  CHECK(parameter_count(c) == want);
  CHECK(init_model(c, 1).params.size() == want);
  ModelConfig bad = c;
  bad.hidden1 = 0;
  CHECK_THROWS_AS(init_model(bad, 1), ConfigError);
}

TEST_CASE("initialisation is seeded") {
  const ModelConfig c = small_config();
  CHECK(init_model(c, 4).params == init_model(c, 4).params);
  CHECK(init_model(c, 4).params != init_model(c, 5).params);
  const ModelState s = init_model(c, 4);
  const ParamLayout L(c);
  for (std::size_t i = L.head_bias; i < L.total; ++i) CHECK(s.params[i] == 0.0);
}

TEST_CASE("forward matches a dense oracle") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig c = small_config();
    c.conv_width = trial % 2 ? 3 : 5;
    ModelState s = init_model(c, static_cast<std::uint64_t>(trial));
    testing::randomize_params(s, rng);
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 5);
    auto adj = testing::random_adjacency(n, 0.5, rng, trial % 3 ? AdjacencyMode::symmetric : AdjacencyMode::raw);
    const Sample smp = testing::random_sample(c, adj, 0, rng);
    CHECK(max_abs_diff(forward(s, *adj, smp.input), naive_forward(s, adj->dense(), n, smp.input)) < 1e-12);
  }
}

TEST_CASE("degenerate inputs") {
  const ModelConfig c = small_config();
  std::mt19937_64 rng(1);
  SUBCASE("zero parameters give zero output") {
    ModelState s = init_model(c, 1);
    std::fill(s.params.begin(), s.params.end(), 0.0);
    auto adj = testing::random_adjacency(5, 0.5, rng);
    const Sample smp = testing::random_sample(c, adj, 0, rng);
    for (double v : forward(s, *adj, smp.input)) CHECK(v == 0.0);
  }
  SUBCASE("single isolated node") {
    ModelState s = init_model(c, 1);
    testing::randomize_params(s, rng);
    const std::vector<double> zero(1, 0.0);
    const Adjacency a = normalize_adjacency(zero, 1);
    const Sample smp = testing::random_sample(c, std::make_shared<const Adjacency>(a), 0, rng);
    const auto y = forward(s, a, smp.input);
    CHECK(y.size() == c.features * c.horizon);
    for (double v : y) CHECK(std::isfinite(v));
  }
  SUBCASE("wrong input size") {
    const ModelState s = init_model(c, 1);
    auto adj = testing::random_adjacency(3, 0.5, rng);
    CHECK_THROWS_AS(forward(s, *adj, std::vector<double>(5, 0.0)), ArgumentError);
  }
}

TEST_CASE("permuting nodes permutes predictions") {
  std::mt19937_64 rng(8);
  const ModelConfig c = small_config();
  ModelState s = init_model(c, 2);
  testing::randomize_params(s, rng);
  const std::size_t n = 6;
  auto adj = testing::random_adjacency(n, 0.5, rng);
  const Sample smp = testing::random_sample(c, adj, 0, rng);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  const auto dense = adj->dense();
  std::vector<double> pd(n * n), px(smp.input.size());
  const std::size_t row = c.features * c.input_steps;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) pd[i * n + j] = dense[perm[i] * n + perm[j]];
    std::copy_n(smp.input.begin() + static_cast<long>(perm[i] * row), row, px.begin() + static_cast<long>(i * row));
  }
  const auto y = forward(s, *adj, smp.input);
  const auto py = forward(s, normalize_adjacency(pd, n, AdjacencyMode::raw), px);
  const std::size_t out = c.features * c.horizon;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t o = 0; o < out; ++o) CHECK(py[i * out + o] == doctest::Approx(y[perm[i] * out + o]).epsilon(1e-12));
}

TEST_CASE("adjacency normalisation") {
  const std::vector<double> pair{0, 1, 1, 0};
  CHECK(normalize_adjacency(pair, 2).dense() == pair);
  // Star: centre degree 3, leaves degree 1, so each entry is 1/sqrt(3).
  std::vector<double> star(16, 0.0);
  for (std::size_t j = 1; j < 4; ++j) star[j] = star[j * 4] = 1.0;
  const auto d = normalize_adjacency(star, 4).dense();
  CHECK(d[1] == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(d[4] == doctest::Approx(1.0 / std::sqrt(3.0)));
  CHECK(d[5] == 0.0);
  std::vector<double> with_isolated(9, 0.0);
  with_isolated[1] = with_isolated[3] = 2.0;
  const auto iso = normalize_adjacency(with_isolated, 3).dense();
  for (std::size_t j = 0; j < 3; ++j) CHECK(iso[2 * 3 + j] == 0.0);
  CHECK(normalize_adjacency(with_isolated, 3, AdjacencyMode::raw).dense() == with_isolated);
  CHECK_THROWS_AS(normalize_adjacency(std::vector<double>{0, -1, -1, 0}, 2), ArgumentError);
  CHECK_THROWS_AS(normalize_adjacency(std::vector<double>{0, 1, 1}, 2), ArgumentError);
  CHECK(adjacency_mode_from_string(to_string(AdjacencyMode::raw)) == AdjacencyMode::raw);
}

TEST_CASE("gradients match central differences") {
  std::mt19937_64 rng(11);
  const ModelConfig c = small_config();
  int checked = 0;
  for (int trial = 0; trial < 5; ++trial) {
    ModelState s = init_model(c, static_cast<std::uint64_t>(trial));
    testing::randomize_params(s, rng);
    auto adj = testing::random_adjacency(4, 0.6, rng);
    Batch batch{testing::random_sample(c, adj, 0, rng), testing::random_sample(c, adj, 1, rng)};
    const LossGradient lg = loss_and_gradients(s, batch);
    CHECK(lg.loss == doctest::Approx(batch_loss(s, batch)).epsilon(1e-14));
    const double h = 1e-6;
    double worst = 0;
    for (std::size_t k = 0; k < s.params.size(); ++k) {
      ModelState plus = s, minus = s;
      plus.params[k] += h;
      minus.params[k] -= h;
      const double fd = (batch_loss(plus, batch) - batch_loss(minus, batch)) / (2 * h);
      const double rel = std::abs(fd - lg.gradient[k]) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, rel);
      ++checked;
    }
    CHECK(worst <= 1e-5);
  }
  CHECK(checked > 0);
}

TEST_CASE("loss properties") {
  std::mt19937_64 rng(6);
  const ModelConfig c = small_config();
  ModelState s = init_model(c, 3);
  testing::randomize_params(s, rng);
  auto adj = testing::random_adjacency(5, 0.5, rng);
  Sample smp = testing::random_sample(c, adj, 0, rng);

  SUBCASE("targets equal to outputs give zero loss and gradient") {
    smp.target = forward(s, *adj, smp.input);
    const LossGradient lg = sample_loss_gradient(s, smp);
    CHECK(lg.loss == 0.0);
    for (double g : lg.gradient) CHECK(g == 0.0);
  }
  SUBCASE("residual scaling scales the loss quadratically") {
    const auto y = forward(s, *adj, smp.input);
    const double base = sample_loss_gradient(s, smp).loss;
    Sample scaled = smp;
    for (std::size_t i = 0; i < y.size(); ++i) scaled.target[i] = y[i] + 3.0 * (smp.target[i] - y[i]);
    CHECK(sample_loss_gradient(s, scaled).loss == doctest::Approx(9.0 * base).epsilon(1e-12));
  }
  SUBCASE("pooled loss weights samples by entries") {
    auto big = testing::random_adjacency(9, 0.5, rng);
    Batch b{smp, testing::random_sample(c, big, 1, rng)};
    const double l0 = sample_loss_gradient(s, b[0]).loss, l1 = sample_loss_gradient(s, b[1]).loss;
    CHECK(batch_loss(s, b) == doctest::Approx((5 * l0 + 9 * l1) / 14.0).epsilon(1e-12));
  }
  SUBCASE("batch validation") {
    Batch dup{smp, smp};
    CHECK_THROWS_AS(validate_batch(c, dup), ArgumentError);
    CHECK_THROWS_AS(loss_and_gradients(s, Batch{}), ArgumentError);
    Sample bad = smp;
    bad.target.pop_back();
    CHECK_THROWS_AS(validate_batch(c, std::vector<Sample>{bad}), ArgumentError);
  }
}

TEST_CASE("output vjp with the MSE cotangent reproduces the gradient") {
  std::mt19937_64 rng(21);
  const ModelConfig c = small_config();
  ModelState s = init_model(c, 3);
  testing::randomize_params(s, rng);
  auto adj = testing::random_adjacency(4, 0.5, rng);
  const Sample smp = testing::random_sample(c, adj, 0, rng);
  const auto y = forward(s, *adj, smp.input);
  std::vector<double> dy(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) dy[i] = 2.0 * (y[i] - smp.target[i]) / static_cast<double>(y.size());
  std::vector<double> g(s.params.size(), 0.0);
  accumulate_output_vjp(s, *adj, smp.input, dy, g);
  CHECK(max_abs_diff(g, sample_loss_gradient(s, smp).gradient) < 1e-12);
}

TEST_CASE("Hessian matches differences of gradients") {
  std::mt19937_64 rng(17);
  ModelConfig c = small_config();
  c.hidden1 = 2;
  ModelState s = init_model(c, 5);
  testing::randomize_params(s, rng);
  auto adj = testing::random_adjacency(3, 0.7, rng);
  Batch batch{testing::random_sample(c, adj, 0, rng), testing::random_sample(c, adj, 1, rng)};
  const auto H = loss_hessian(s, batch);
  const std::size_t P = s.params.size();
  REQUIRE(H.size() == P * P);
  const double h = 1e-6;
  double worst = 0;
  for (std::size_t k = 0; k < P; ++k) {
    ModelState plus = s, minus = s;
    plus.params[k] += h;
    minus.params[k] -= h;
    const auto gp = loss_and_gradients(plus, batch).gradient;
    const auto gm = loss_and_gradients(minus, batch).gradient;
    for (std::size_t r = 0; r < P; ++r) {
      const double fd = (gp[r] - gm[r]) / (2 * h);
      worst = std::max(worst, std::abs(fd - H[r * P + k]) / std::max(1.0, std::abs(fd)));
    }
  }
  CHECK(worst <= 1e-5);
  for (std::size_t r = 0; r < P; ++r)
    for (std::size_t k = 0; k < r; ++k) CHECK(H[r * P + k] == doctest::Approx(H[k * P + r]).epsilon(1e-10));
}

TEST_CASE("adaptive-moment optimiser") {
  ModelState s = init_model(small_config(), 1);
  const auto before = s.params;
  std::vector<double> zero(s.params.size(), 0.0);
  optimizer_step(s, zero, 0.01);
  CHECK(s.params == before);
  CHECK(s.step == 1);

  ModelState t = init_model(small_config(), 1);
  std::vector<double> g(t.params.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = (i % 2 ? 1.0 : -1.0) * (0.1 + static_cast<double>(i) * 1e-3);
  optimizer_step(t, g, 0.01);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(t.params[i] - before[i] == doctest::Approx(g[i] > 0 ? -0.01 : 0.01).epsilon(1e-6));
  }

  ModelState u = init_model(small_config(), 1);
  optimizer_step(u, g, 0.0);
  CHECK(u.params == before);

  ModelState v = init_model(small_config(), 1);
  optimizer_step(v, g, 0.01);
  const ModelState snapshot = v;
  g[3] = std::nan("");
  CHECK_THROWS_AS(optimizer_step(v, g, 0.01), NumericalError);
  CHECK(v.params == snapshot.params);
  CHECK(v.moment1 == snapshot.moment1);
  CHECK(v.moment2 == snapshot.moment2);
  CHECK(v.step == snapshot.step);
}

TEST_CASE("checkpoint round trip and corruption") {
  std::mt19937_64 rng(2);
  ModelState s = init_model(small_config(), 9);
  testing::randomize_params(s, rng);
  std::vector<double> g(s.params.size(), 0.3);
  optimizer_step(s, g, 0.01);
  const auto dir = testing::temp_dir("ckpt");
  const auto file = dir / "model.bin";
  write_checkpoint(file, s, {{"interval", 4}});
  const LoadedCheckpoint back = read_checkpoint(file);
  CHECK(back.state.config == s.config);
  CHECK(back.state.params == s.params);
  CHECK(back.state.moment1 == s.moment1);
  CHECK(back.state.moment2 == s.moment2);
  CHECK(back.state.step == s.step);
  CHECK(back.extra.at("interval") == 4);

  const auto size = std::filesystem::file_size(file);
  std::filesystem::resize_file(file, size - 5);
  try {
    read_checkpoint(file);
    FAIL("truncated checkpoint was accepted");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("byte offset") != std::string::npos);
  }
  {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << "NOTACKPT and then some";
  }
  CHECK_THROWS_AS(read_checkpoint(file), FormatError);
  CHECK_THROWS_AS(read_checkpoint(dir / "missing.bin"), FormatError);
  std::filesystem::remove_all(dir);
}
