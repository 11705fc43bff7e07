#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "test_support.hpp"
#include "tot/checkpoint.hpp"
#include "tot/encoder.hpp"
#include "tot/errors.hpp"

using namespace tot;

namespace {

EncoderParams random_params(const EncoderShape& shape, Rng& rng) {
  EncoderParams p = zeros_like(shape);
  p.for_each([&](Matrix& m) { m = oracle::random_matrix(m.rows(), m.cols(), rng); });
  return p;
}

double weighted_output(const EncoderParams& p, const Matrix& x, const Matrix& weights) {
  const Matrix z = forward(p, x).embeddings;
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += weights.values()[i] * z.values()[i];
  return s;
}

}  // namespace

TEST_CASE("forward closed form with zero parameters") {
  const EncoderParams p = zeros_like({4, 5, 3, 2});
  const Matrix z = forward(p, Matrix(2, 4, 7.0)).embeddings;
  for (double v : z.values()) CHECK(v == 0.5);
}

TEST_CASE("forward is row independent and bounded") {
  Rng rng(4);
  const EncoderParams p = random_params({4, 5, 3, 2}, rng);
  const Matrix x = oracle::random_matrix(3, 4, rng, -3, 3);
  const Matrix batch = forward(p, x).embeddings;
  for (std::size_t r = 0; r < 3; ++r) {
    const Matrix single = forward(p, slice_rows(x, r, 1)).embeddings;
    for (std::size_t c = 0; c < 3; ++c) CHECK(single(0, c) == batch(r, c));
  }
  for (double v : batch.values()) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(embed(p, x) == batch);
}

TEST_CASE("backward with zero upstream gradient") {
  Rng rng(1);
  const EncoderParams p = random_params({4, 5, 3, 2}, rng);
  const auto out = forward(p, oracle::random_matrix(6, 4, rng));
  const EncoderParams g = backward(p, out.cache, Matrix(6, 3));
  g.for_each([](const Matrix& m) {
    for (double v : m.values()) CHECK(v == 0.0);
  });
}

TEST_CASE("backward matches central finite differences") {
  Rng rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const EncoderParams p = random_params({4, 5, 3, 2}, rng);
    const Matrix x = oracle::random_matrix(6, 4, rng);
    const Matrix w = oracle::random_matrix(6, 3, rng);
    const EncoderParams g = backward(p, forward(p, x).cache, w);

    auto check = [&](Matrix EncoderParams::*member) {
      auto f = [&](const Matrix& m) {
        EncoderParams q = p;
        q.*member = m;
        return weighted_output(q, x, w);
      };
      CHECK(oracle::max_relative_error(g.*member, oracle::finite_difference(f, p.*member)) < 1e-4);
    };
    check(&EncoderParams::w1);
    check(&EncoderParams::b1);
    check(&EncoderParams::w2);
    check(&EncoderParams::b2);
  }
}

TEST_CASE("backward is linear in duplicated rows") {
  Rng rng(6);
  const EncoderParams p = random_params({4, 5, 3, 2}, rng);
  const Matrix x = oracle::random_matrix(1, 4, rng);
  const Matrix w = oracle::random_matrix(1, 3, rng);
  const EncoderParams single = backward(p, forward(p, x).cache, w);
  const EncoderParams doubled = backward(p, forward(p, vstack(x, x)).cache, vstack(w, w));
  CHECK(oracle::max_abs_diff(doubled.w1, Matrix(single.w1.rows(), single.w1.cols())) > 0.0);
  Matrix twice = single.w1;
  for (double& v : twice.values()) v *= 2.0;
  CHECK(oracle::max_abs_diff(doubled.w1, twice) < 1e-14);
  Matrix twice_b2 = single.b2;
  for (double& v : twice_b2.values()) v *= 2.0;
  CHECK(oracle::max_abs_diff(doubled.b2, twice_b2) < 1e-14);
}

TEST_CASE("adam leaves parameters alone with zero gradient and no decay") {
  Rng rng(3);
  EncoderParams p = random_params({3, 4, 2, 2}, rng);
  const EncoderParams before = p;
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  AdamState state = init_adam(p.shape(), cfg);
  for (int i = 0; i < 5; ++i) adam_step(p, zeros_like(p.shape()), state);
  CHECK(p.w1 == before.w1);
  CHECK(p.prototypes == before.prototypes);
}

TEST_CASE("first adam step moves by lr against the gradient sign") {
  Rng rng(8);
  EncoderParams p = random_params({3, 4, 2, 2}, rng);
  const EncoderParams before = p;
  EncoderParams g = random_params(p.shape(), rng);
  AdamConfig cfg;
  cfg.weight_decay = 0.0;
  AdamState state = init_adam(p.shape(), cfg);
  adam_step(p, g, state);
  for (std::size_t i = 0; i < p.w1.size(); ++i) {
    const double grad = g.w1.values()[i];
    const double expected = -cfg.learning_rate * grad / (std::abs(grad) + cfg.epsilon);
    CHECK(std::abs((p.w1.values()[i] - before.w1.values()[i]) - expected) < 1e-15);
  }
}

TEST_CASE("adam decreases a convex quadratic") {
  Rng rng(10);
  EncoderParams p = random_params({3, 4, 2, 2}, rng);
  AdamConfig cfg;
  cfg.learning_rate = 1e-2;
  AdamState state = init_adam(p.shape(), cfg);
  auto loss = [](const EncoderParams& q) {
    double s = 0.0;
    q.for_each([&](const Matrix& m) {
      for (double v : m.values()) s += v * v;
    });
    return s;
  };
  double previous = loss(p);
  for (int step = 1; step <= 100; ++step) {
    EncoderParams g = p;
    g.for_each([](Matrix& m) {
      for (double& v : m.values()) v *= 2.0;
    });
    adam_step(p, g, state);
    const double now = loss(p);
    if (step > 5) CHECK(now < previous);
    previous = now;
  }
}

TEST_CASE("frozen prototypes are untouched until released") {
  Rng rng(12);
  EncoderParams p = random_params({3, 4, 2, 3}, rng);
  AdamState state = init_adam(p.shape(), {});
  freeze_prototypes(state, true);
  const Matrix frozen = p.prototypes;
  const EncoderParams g = random_params(p.shape(), rng);
  for (int i = 0; i < 7; ++i) adam_step(p, g, state);
  CHECK(p.prototypes == frozen);
  CHECK(state.first_moment.prototypes == Matrix(3, 2));
  CHECK(state.prototype_step == 0);
  freeze_prototypes(state, false);
  adam_step(p, g, state);
  CHECK_FALSE(p.prototypes == frozen);
}

TEST_CASE("init_encoder produces bounded weights and unit prototypes") {
  Rng rng(7);
  const EncoderParams p = init_encoder({10, 20, 5, 4}, rng);
  const double limit = std::sqrt(6.0 / 30.0);
  for (double v : p.w1.values()) CHECK(std::abs(v) <= limit);
  for (double v : p.b1.values()) CHECK(v == 0.0);
  for (std::size_t k = 0; k < 4; ++k) {
    double sq = 0.0;
    for (double v : p.prototypes.row(k)) sq += v * v;
    CHECK(std::abs(sq - 1.0) < 1e-12);
  }
}

TEST_CASE("checkpoint round trip is exact") {
  Rng rng(13);
  Checkpoint cp;
  cp.params = random_params({3, 4, 2, 3}, rng);
  cp.adam = init_adam(cp.params.shape(), {});
  cp.adam.first_moment = random_params(cp.params.shape(), rng);
  cp.adam.second_moment = random_params(cp.params.shape(), rng);
  cp.adam.step = 42;
  cp.adam.prototype_step = 17;
  cp.adam.prototypes_frozen = true;
  cp.inference = {0.25, false};
  TempDir dir;
  save_checkpoint(cp, dir.path() / "m.totc");
  const Checkpoint back = load_checkpoint(dir.path() / "m.totc");
  CHECK(back.params.w1 == cp.params.w1);
  CHECK(back.params.prototypes == cp.params.prototypes);
  CHECK(back.adam.second_moment.b2 == cp.adam.second_moment.b2);
  CHECK(back.adam.step == 42);
  CHECK(back.adam.prototype_step == 17);
  CHECK(back.adam.prototypes_frozen);
  CHECK(back.inference.temperature == 0.25);
  CHECK_FALSE(back.inference.normalize);

  write_text(dir.path() / "bad.totc", "NOPE");
  CHECK_THROWS_AS(load_checkpoint(dir.path() / "bad.totc"), DataError);
}
