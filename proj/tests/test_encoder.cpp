#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "oracles.hpp"
#include "pclmp/encoder.hpp"
#include "pclmp/error.hpp"

using namespace pclmp;

namespace {

Matrix random_inputs(std::mt19937_64& rng, std::size_t n, std::size_t d) {
  std::normal_distribution<double> g;
  Matrix m(n, d);
  for (auto& x : m.data) x = g(rng);
  return m;
}

}  // namespace

TEST_CASE("identity layer normalizes its input") {
  const Vec y = forward(EncoderParams::identity(2), Vec{3.0, 4.0});
  CHECK(y[0] == doctest::Approx(0.6));
  CHECK(y[1] == doctest::Approx(0.8));
}

TEST_CASE("zero input follows the bias path") {
  const std::size_t dims[] = {3, 4, 2};
  EncoderParams p = EncoderParams::random(dims, 1);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (std::size_t l = 0; l < 2; ++l)
    for (auto& b : p.bias(l)) b = g(rng);
  Vec h(4);
  for (std::size_t i = 0; i < 4; ++i) h[i] = std::tanh(p.bias(0)[i]);
  const Matrix w1 = p.weight(1);
  Vec out(2);
  for (std::size_t i = 0; i < 2; ++i) {
    out[i] = p.bias(1)[i];
    for (std::size_t j = 0; j < 4; ++j) out[i] += w1(i, j) * h[j];
  }
  const Vec want = l2_normalize(out);
  const Vec got = forward(p, Vec{0.0, 0.0, 0.0});
  for (std::size_t i = 0; i < 2; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

TEST_CASE("outputs are unit norm and batch matches single") {
  std::mt19937_64 rng(11);
  const std::size_t dims[] = {32, 128, 64};
  const EncoderParams p = EncoderParams::random(dims, 5);
  const Matrix x = random_inputs(rng, 20, 32);
  const Matrix y = forward_batch(p, x);
  for (std::size_t i = 0; i < 20; ++i) {
    CHECK(std::abs(l2_norm(y.row(i)) - 1.0) < 1e-9);
    const Vec single = forward(p, x.row(i));
    for (std::size_t j = 0; j < 64; ++j) CHECK(single[j] == y(i, j));
  }
}

TEST_CASE("random init is seeded") {
  const std::size_t dims[] = {4, 6, 3};
  CHECK(EncoderParams::random(dims, 9) == EncoderParams::random(dims, 9));
  CHECK(!(EncoderParams::random(dims, 9) == EncoderParams::random(dims, 10)));
  const auto p = EncoderParams::random(dims, 9);
  for (double b : p.bias(0)) CHECK(b == 0.0);
  for (double w : p.weight_span(0)) CHECK(std::abs(w) <= 0.5);
}

TEST_CASE("backward matches central differences on every parameter") {
  const std::size_t dims[] = {8, 8, 8};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const Matrix x = random_inputs(rng, 3, 8);
    const Matrix g = random_inputs(rng, 3, 8);
    EncoderParams p = EncoderParams::random(dims, seed);
    for (std::size_t l = 0; l < 2; ++l)
      for (auto& b : p.bias(l)) b = 0.1 * std::normal_distribution<double>()(rng);

    ForwardCache cache;
    forward_batch(p, x, &cache);
    const EncoderParams grad = backward_batch(p, cache, g);

    auto objective = [&](const EncoderParams& q) {
      const Matrix y = forward_batch(q, x);
      double s = 0.0;
      for (std::size_t i = 0; i < y.data.size(); ++i) s += y.data[i] * g.data[i];
      return s;
    };
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double fd = oracle::central_diff(
          [&](double v) {
            EncoderParams q = p;
            q.flat()[i] = v;
            return objective(q);
          },
          p.flat()[i]);
      worst = std::max(worst, oracle::rel_err(grad.flat()[i], fd));
    }
  }
  MESSAGE("max relative error " << worst);
  CHECK(worst < 1e-4);
}

TEST_CASE("zero upstream gradient gives zero parameter gradient") {
  const std::size_t dims[] = {5, 7, 4};
  const EncoderParams p = EncoderParams::random(dims, 2);
  const EncoderParams g = backward(p, Vec{1, 2, 3, 4, 5}, Vec(4, 0.0));
  for (double v : g.flat()) CHECK(v == 0.0);
}

TEST_CASE("gradient along the output direction is annihilated") {
  const std::size_t dims[] = {5, 7, 4};
  const EncoderParams p = EncoderParams::random(dims, 2);
  const Vec x{0.3, -1.0, 2.0, 0.5, 0.1};
  const Vec y = forward(p, x);
  const EncoderParams g = backward(p, x, y);
  for (double v : g.flat()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("ema update") {
  EncoderParams m(std::vector<LayerShape>{{1, 1}});
  EncoderParams o = m.zeros_like();
  o.flat()[0] = 1.0;
  ema_update(m, o, 0.999);
  CHECK(m.flat()[0] == doctest::Approx(0.001).epsilon(1e-12));

  EncoderParams fixed = m;
  ema_update(fixed, o, 1.0);
  CHECK(fixed == m);

  EncoderParams other(std::vector<LayerShape>{{2, 1}});
  CHECK_THROWS_AS(ema_update(m, other, 0.5), Error);
}

TEST_CASE("ema follows the closed-form geometric law") {
  const std::size_t dims[] = {3, 4, 2};
  EncoderParams m = EncoderParams::random(dims, 1);
  const EncoderParams m0 = m;
  const EncoderParams o = EncoderParams::random(dims, 2);
  const double beta = 0.999;
  for (int t = 0; t < 100; ++t) ema_update(m, o, beta);
  const double bt = std::pow(beta, 100);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double want = o.flat()[i] + bt * (m0.flat()[i] - o.flat()[i]);
    CHECK(oracle::rel_err(m.flat()[i], want, 1e-12) < 1e-9);
  }
}

TEST_CASE("learning rate schedule") {
  AdamConfig cfg;
  CHECK(learning_rate(cfg, 0) == doctest::Approx(3.5e-4));
  CHECK(learning_rate(cfg, 19) == doctest::Approx(3.5e-4));
  CHECK(learning_rate(cfg, 20) == doctest::Approx(3.5e-5));
  CHECK(learning_rate(cfg, 40) == doctest::Approx(3.5e-6));
  cfg.decay_every = 0;
  CHECK(learning_rate(cfg, 1000) == doctest::Approx(3.5e-4));
}

TEST_CASE("adam") {
  AdamConfig cfg;
  SUBCASE("zero gradient leaves params unchanged") {
    const std::size_t dims[] = {3, 2};
    EncoderParams p = EncoderParams::random(dims, 4);
    const EncoderParams before = p;
    AdamState s = AdamState::for_params(p);
    adam_step(p, p.zeros_like(), s, cfg, 0.1);
    CHECK(p == before);
    CHECK(s.step == 1);
  }
  SUBCASE("scalar steps by hand") {
    EncoderParams p(std::vector<LayerShape>{{1, 1}});
    p.flat()[0] = 1.0;
    EncoderParams g = p.zeros_like();
    g.flat()[0] = 0.2;
    AdamState s = AdamState::for_params(p);
    adam_step(p, g, s, cfg, 0.01);
    // m = 0.02, v = 4e-5; corrected m = 0.2, v = 0.04 -> step 0.2 / (0.2 + 1e-8)
    CHECK(p.flat()[0] == doctest::Approx(1.0 - 0.01 * 0.2 / (0.2 + 1e-8)).epsilon(1e-14));
    g.flat()[0] = -0.1;
    adam_step(p, g, s, cfg, 0.01);
    const double m = 0.9 * 0.02 + 0.1 * -0.1, v = 0.999 * 4e-5 + 0.001 * 0.01;
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    CHECK(p.flat()[0] == doctest::Approx(1.0 - 0.01 * 0.2 / (0.2 + 1e-8) - 0.01 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-14));
  }
}

TEST_CASE("checkpoint round-trip") {
  const std::size_t dims[] = {6, 5, 3};
  Checkpoint c;
  c.epoch = 17;
  c.step = 123456789012ULL;
  c.online = EncoderParams::random(dims, 1);
  c.momentum = EncoderParams::random(dims, 2);
  c.adam = AdamState::for_params(c.online);
  c.adam.step = c.step;
  for (std::size_t i = 0; i < c.adam.m.size(); ++i) {
    c.adam.m[i] = 0.25 * static_cast<double>(i);
    c.adam.v[i] = 0.5;
  }
  const auto path = std::filesystem::temp_directory_path() / "pclmp_test_ckpt.xpck";
  save_checkpoint(c, path);
  const Checkpoint back = load_checkpoint(path);
  CHECK(back.epoch == 17);
  CHECK(back.step == c.step);
  CHECK(back.online.shapes() == c.online.shapes());
  for (std::size_t i = 0; i < c.online.size(); ++i) {
    CHECK(back.online.flat()[i] == doctest::Approx(c.online.flat()[i]).epsilon(1e-7));
    CHECK(back.momentum.flat()[i] == doctest::Approx(c.momentum.flat()[i]).epsilon(1e-7));
    CHECK(back.adam.m[i] == c.adam.m[i]);
  }
  // A second save of the loaded state is byte-stable.
  const auto path2 = std::filesystem::temp_directory_path() / "pclmp_test_ckpt2.xpck";
  save_checkpoint(back, path2);
  CHECK(load_checkpoint(path2).online == back.online);
}
