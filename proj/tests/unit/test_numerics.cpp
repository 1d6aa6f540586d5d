#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "picknet/adam.hpp"
#include "picknet/grad_check.hpp"
#include "picknet/ops.hpp"
#include "picknet/rng.hpp"
#include "picknet/tensor.hpp"

using namespace picknet;

TEST_CASE("affine basics") {
  Tensor I = Tensor::matrix(2, 2);
  I(0, 0) = 1.0;
  I(1, 1) = 1.0;
  Tensor x = Tensor::from({3.0, 4.0});
  Tensor zero_b = Tensor::vector(2);
  Tensor y = affine(I, x, zero_b);
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 4.0);

  Tensor Z = Tensor::matrix(2, 2);
  Tensor b = Tensor::from({1.0, 2.0});
  y = affine(Z, x, b);
  CHECK(y[0] == 1.0);
  CHECK(y[1] == 2.0);

  Tensor W = Tensor::matrix(2, 2);
  W(0, 0) = 1.0;
  W(0, 1) = 2.0;
  W(1, 0) = 3.0;
  W(1, 1) = 4.0;
  y = affine(W, Tensor::from({1.0, 1.0}), zero_b);
  CHECK(y[0] == 3.0);
  CHECK(y[1] == 7.0);
}

TEST_CASE("affine shape mismatch names both shapes") {
  Tensor W = Tensor::matrix(2, 3);
  Tensor x = Tensor::from({1.0, 2.0});
  Tensor b = Tensor::vector(2);
  CHECK_THROWS_MATCHES(affine(W, x, b), ShapeError,
                       Catch::Matchers::MessageMatches(Catch::Matchers::ContainsSubstring("2x3") &&
                                                       Catch::Matchers::ContainsSubstring("[2]")));
}

TEST_CASE("softmax symmetry, shift invariance, stability") {
  Tensor p = softmax_stable(Tensor::from({0.0, 0.0}));
  CHECK(p[0] == Catch::Approx(0.5).margin(1e-15));
  CHECK(p[1] == Catch::Approx(0.5).margin(1e-15));

  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> vals(5);
    for (double& v : vals) v = rng.uniform(-3.0, 3.0);
    const double shift = rng.uniform(-100.0, 100.0);
    Tensor a = softmax_stable(Tensor::from(vals));
    std::vector<double> shifted = vals;
    for (double& v : shifted) v += shift;
    Tensor b = softmax_stable(Tensor::from(shifted));
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(std::abs(a[i] - b[i]) < 1e-12);
      CHECK(a[i] > 0.0);
      CHECK(a[i] < 1.0);
      sum += a[i];
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }

  Tensor big = softmax_stable(Tensor::from({1000.0, 0.0}));
  CHECK(big[0] == Catch::Approx(1.0).margin(1e-12));
  CHECK(big[1] == Catch::Approx(0.0).margin(1e-12));

  CHECK_THROWS_AS(softmax_stable(Tensor::vector(0)), UsageError);
}

TEST_CASE("categorical sampling") {
  Rng rng(3);
  Tensor point = Tensor::from({1.0, 0.0});
  for (int i = 0; i < 20; ++i) CHECK(sample_categorical(point, rng) == 0);

  Rng a(99), b(99);
  Tensor p = Tensor::from({0.3, 0.4, 0.3});
  for (int i = 0; i < 100; ++i) CHECK(sample_categorical(p, a) == sample_categorical(p, b));

  Rng freq_rng(7);
  Tensor half = Tensor::from({0.5, 0.5});
  int zeros = 0;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i)
    if (sample_categorical(half, freq_rng) == 0) ++zeros;
  const double rate = static_cast<double>(zeros) / draws;
  CHECK(rate > 0.49);
  CHECK(rate < 0.51);

  CHECK_THROWS_AS(sample_categorical(Tensor::from({0.5, 0.2}), rng), UsageError);
  CHECK_THROWS_AS(sample_categorical(Tensor::from({1.5, -0.5}), rng), UsageError);
}

TEST_CASE("rng replays from seed and derives independent streams") {
  Rng a(1234), b(1234);
  for (int i = 0; i < 1000; ++i) CHECK(a.next_u64() == b.next_u64());

  Rng base(5);
  Rng c1 = base.derive(0);
  Rng c2 = base.derive(1);
  CHECK(c1.next_u64() != c2.next_u64());
  Rng c1_again = base.derive(0);
  c1 = base.derive(0);
  for (int i = 0; i < 100; ++i) CHECK(c1.next_u64() == c1_again.next_u64());
}

TEST_CASE("adam zero gradients leave values unchanged") {
  Param w("w", Tensor::from({1.5, -2.0, 0.25}));
  Adam opt({&w}, AdamConfig{.lr = 0.1});
  for (int step = 0; step < 5; ++step) {
    opt.step();
    CHECK(w.value[0] == 1.5);
    CHECK(w.value[1] == -2.0);
    CHECK(w.value[2] == 0.25);
  }
}

TEST_CASE("adam first step is roughly -lr * sign(g)") {
  Param w("w", Tensor::from({2.0}));
  AdamConfig cfg{.lr = 0.01};
  Adam opt({&w}, cfg);
  w.grad[0] = 3.7;
  opt.step();
  // mhat = g, vhat = g^2 at t=1, so the update is lr * g / (|g| + eps)
  CHECK(w.value[0] == Catch::Approx(2.0 - 0.01).epsilon(1e-6));
  CHECK(w.grad[0] == 0.0);
  CHECK(opt.t() == 1);

  Param neg("n", Tensor::from({0.0}));
  Adam opt2({&neg}, cfg);
  neg.grad[0] = -0.004;
  opt2.step();
  CHECK(neg.value[0] == Catch::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("adam runs are bit-identical") {
  auto run = [] {
    Rng rng(42);
    Param w("w", Tensor::vector(8));
    glorot_init(w.value, rng);
    Adam opt({&w}, AdamConfig{.lr = 3e-3});
    for (int step = 0; step < 50; ++step) {
      for (std::size_t i = 0; i < w.value.size(); ++i)
        w.grad[i] = 2.0 * w.value[i] + rng.uniform(-0.1, 0.1);
      opt.step();
    }
    return w.value;
  };
  Tensor a = run();
  Tensor b = run();
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("global norm clipping") {
  Param w("w", Tensor::from({0.0, 0.0}));
  w.grad[0] = 3.0;
  w.grad[1] = 4.0;
  clip_global_norm({&w}, 5.0);
  CHECK(w.grad[0] == 3.0);  // norm exactly 5, untouched
  clip_global_norm({&w}, 1.0);
  CHECK(std::sqrt(w.grad[0] * w.grad[0] + w.grad[1] * w.grad[1]) == Catch::Approx(1.0));
  w.grad[0] = 1.0;
  w.grad[1] = 0.0;
  clip_global_norm({&w}, 0.0);  // disabled
  CHECK(w.grad[0] == 1.0);
}

TEST_CASE("grad_check validates a quadratic exactly") {
  Param w("w", Tensor::from({3.0}));
  w.grad[0] = 6.0;  // d/dw w^2 at 3
  auto f = [&] { return w.value[0] * w.value[0]; };
  auto report = grad_check(f, {&w}, 1e-5);
  CHECK(report.max_rel_err < 1e-9);
}

TEST_CASE("grad_check on affine+sigmoid+sum") {
  Rng rng(17);
  Param W("W", Tensor::matrix(3, 3));
  Param b("b", Tensor::vector(3));
  glorot_init(W.value, rng);
  Tensor x = Tensor::from({0.3, -0.8, 1.1});

  auto loss = [&] {
    Tensor y = affine(W.value, x, b.value);
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) total += sigmoid(y[i]);
    return total;
  };
  // analytic gradients
  Tensor y = affine(W.value, x, b.value);
  for (std::size_t i = 0; i < 3; ++i) {
    const double s = sigmoid(y[i]);
    const double ds = s * (1.0 - s);
    b.grad[i] = ds;
    for (std::size_t j = 0; j < 3; ++j) W.grad(i, j) = ds * x[j];
  }
  auto report = grad_check(loss, {&W, &b}, 1e-5);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("grad_check of a constant is zero") {
  Param w("w", Tensor::from({1.0, 2.0}));
  auto report = grad_check([] { return 7.5; }, {&w}, 1e-5);
  CHECK(report.max_rel_err == 0.0);
}

TEST_CASE("glorot init stays within its bound and biases stay zero") {
  Rng rng(1);
  Tensor W = Tensor::matrix(6, 4);
  glorot_init(W, rng);
  const double a = std::sqrt(6.0 / (6 + 4));
  for (double v : W.data()) {
    CHECK(v <= a);
    CHECK(v >= -a);
  }
  Param p("p", Tensor::matrix(2, 2));
  CHECK(p.grad.size() == 4);
  for (double v : p.grad.data()) CHECK(v == 0.0);
}
