#include <doctest.h>

#include <cmath>
#include <limits>

#include "dsnet/error.hpp"
#include "dsnet/nn.hpp"
#include "dsnet/optim.hpp"
#include "oracles.hpp"

using namespace dsnet;

namespace {

Tensor64 random_one_hot(std::size_t n, std::size_t k, Rng& rng) {
  Tensor64 t({n, k}, 0.0);
  for (std::size_t i = 0; i < n; ++i) t[i * k + rng.below(k)] = 1.0;
  return t;
}

struct Scalar {
  Tensor64 value{{1}, 0.0};
  Tensor64 grad{{1}, 0.0};
  std::vector<optim::ParamSlot<double>> slots() { return {{"theta", &value, &grad}}; }
};

}  // namespace

TEST_CASE("cross-entropy values") {
  const Tensor64 t({2, 3}, {0, 1, 0, 1, 0, 0});
  CHECK(optim::categorical_cross_entropy(t, t).loss <= 1e-6);
  const Tensor64 half({1, 2}, {0.5, 0.5});
  CHECK(optim::categorical_cross_entropy(half, Tensor64({1, 2}, {1, 0})).loss ==
        doctest::Approx(0.693147).epsilon(1e-6));
  // A zero probability on the true class is clamped, not infinite.
  const auto clamped = optim::categorical_cross_entropy(Tensor64({1, 2}, {0, 1}), Tensor64({1, 2}, {1, 0}));
  CHECK(clamped.loss == doctest::Approx(-std::log(1e-7)));
}

TEST_CASE("cross-entropy validates its inputs") {
  CHECK_THROWS_AS(optim::categorical_cross_entropy(Tensor64({1, 2}, {0.5, 0.5}), Tensor64({1, 2}, {0.5, 0.5})),
                  ContractError);
  CHECK_THROWS_AS(optim::categorical_cross_entropy(Tensor64({1, 2}, {0.9, 0.9}), Tensor64({1, 2}, {1, 0})),
                  ContractError);
  CHECK_THROWS_AS(optim::categorical_cross_entropy(Tensor64({1, 2}, {0.5, 0.5}), Tensor64({1, 3}, {1, 0, 0})),
                  ShapeError);
}

TEST_CASE("cross-entropy is non-negative, zero only on a match") {
  Rng rng(41);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(4), k = 2 + rng.below(4);
    const auto t = random_one_hot(n, k, rng);
    const auto p = nn::softmax(Tensor64::normal({n, k}, rng, 0.0, 3.0));
    const double loss = optim::categorical_cross_entropy(p, t).loss;
    REQUIRE(loss >= 0.0);
    REQUIRE(loss > 1e-9);
    REQUIRE(optim::categorical_cross_entropy(t, t).loss == 0.0);
  }
}

TEST_CASE("cross-entropy gradient matches finite differences") {
  Rng rng(42);
  auto p = nn::softmax(Tensor64::normal({3, 4}, rng));
  const auto t = random_one_hot(3, 4, rng);
  const auto g = optim::categorical_cross_entropy(p, t).grad;
  // Differentiate the unconstrained formula -sum t ln p / N directly.
  auto loss = [&] {
    double s = 0;
    for (std::size_t i = 0; i < p.size(); ++i) s -= t[i] * std::log(p[i]);
    return s / 3.0;
  };
  CHECK(test::max_relative_error(g, test::numeric_gradient(loss, p)) < 1e-6);
}

TEST_CASE("fused softmax cross-entropy equals the composed gradient") {
  Rng rng(43);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(5), k = 2 + rng.below(5);
    const auto z = Tensor64::normal({n, k}, rng, 0.0, 2.0);
    const auto t = random_one_hot(n, k, rng);
    const auto fused = optim::softmax_cross_entropy(z, t);
    const auto p = nn::softmax(z);
    const auto ce = optim::categorical_cross_entropy(p, t);
    REQUIRE(std::abs(fused.loss - ce.loss) < 1e-12);
    Tensor64 composed({n, k});
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0;
      for (std::size_t j = 0; j < k; ++j) dot += p[i * k + j] * ce.grad[i * k + j];
      for (std::size_t j = 0; j < k; ++j) {
        composed[i * k + j] = p[i * k + j] * (ce.grad[i * k + j] - dot);
      }
    }
    REQUIRE(test::max_relative_error(fused.grad_logits, composed) < 1e-6);
  }
}

TEST_CASE("softmax cross-entropy gradient matches finite differences") {
  Rng rng(44);
  auto z = Tensor64::normal({4, 4}, rng);
  const auto t = random_one_hot(4, 4, rng);
  const auto g = optim::softmax_cross_entropy(z, t).grad_logits;
  auto loss = [&] { return optim::softmax_cross_entropy(z, t).loss; };
  CHECK(test::max_relative_error(g, test::numeric_gradient(loss, z)) < 1e-6);
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  Rng rng(45);
  Tensor64 w = Tensor64::normal({3, 4}, rng);
  const Tensor64 before = w;
  Tensor64 g(w.shape(), 0.0);
  std::vector<optim::ParamSlot<double>> slots{{"w", &w, &g}};
  auto state = optim::make_adam_state<double>(slots);
  optim::adam_step<double>(slots, state);
  CHECK(w == before);
  CHECK(state.step == 1);
}

TEST_CASE("adam first steps") {
  Scalar s;
  s.grad[0] = 10.0;
  auto slots = s.slots();
  auto state = optim::make_adam_state<double>(slots);
  optim::adam_step<double>(slots, state);
  // m-hat = g, v-hat = g^2: the step is -lr * g / (|g| + eps).
  CHECK(s.value[0] == doctest::Approx(-0.001 * 10.0 / (10.0 + 1e-8)).epsilon(1e-12));
  const double after_one = s.value[0];
  optim::adam_step<double>(slots, state);
  CHECK(std::abs(s.value[0] - after_one) == doctest::Approx(0.001).epsilon(1e-6));
}

TEST_CASE("adam first step is invariant to gradient scale") {
  Rng rng(46);
  for (int trial = 0; trial < 200; ++trial) {
    const double g = rng.uniform(0.01, 100.0) * (rng.below(2) ? 1 : -1);
    const double c = rng.uniform(0.1, 1000.0);
    Scalar a, b;
    a.grad[0] = g;
    b.grad[0] = c * g;
    auto sa = a.slots();
    auto sb = b.slots();
    auto st_a = optim::make_adam_state<double>(sa);
    auto st_b = optim::make_adam_state<double>(sb);
    optim::adam_step<double>(sa, st_a);
    optim::adam_step<double>(sb, st_b);
    REQUIRE(std::abs(a.value[0] - b.value[0]) <= 1e-6 * std::abs(a.value[0]));
  }
}

TEST_CASE("one adam step descends a 1-D quadratic") {
  Rng rng(47);
  for (int trial = 0; trial < 500; ++trial) {
    optim::AdamOptions opt;
    opt.learning_rate = rng.uniform(1e-4, 0.1);
    const double target = rng.uniform(-5, 5);
    double start = rng.uniform(-10, 10);
    if (std::abs(start - target) < 0.2) start = target + 0.5;
    Scalar s;
    s.value[0] = start;
    s.grad[0] = 2.0 * (start - target);
    auto slots = s.slots();
    auto state = optim::make_adam_state<double>(slots, opt);
    optim::adam_step<double>(slots, state);
    REQUIRE(std::pow(s.value[0] - target, 2) < std::pow(start - target, 2));
  }
}

TEST_CASE("adam rejects non-finite gradients before touching anything") {
  Tensor64 a({2}, {1, 2}), ga({2}, {0.5, 0.5});
  Tensor64 b({2}, {3, 4}), gb({2}, {0.1, std::numeric_limits<double>::quiet_NaN()});
  std::vector<optim::ParamSlot<double>> slots{{"first", &a, &ga}, {"second.weight", &b, &gb}};
  auto state = optim::make_adam_state<double>(slots);
  try {
    optim::adam_step<double>(slots, state);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("second.weight") != std::string::npos);
  }
  CHECK(a == Tensor64({2}, {1, 2}));
  CHECK(state.step == 0);
  CHECK(state.m[0] == Tensor64({2}, 0.0));
}

TEST_CASE("float and double paths agree") {
  Rng rng(48);
  const auto z = Tensor64::normal({3, 4}, rng);
  const auto t = random_one_hot(3, 4, rng);
  const auto d = optim::softmax_cross_entropy(z, t);
  const auto f = optim::softmax_cross_entropy(z.cast<float>(), t.cast<float>());
  CHECK(std::abs(static_cast<double>(f.loss) - d.loss) < 1e-5);
  CHECK(max_abs_diff(f.grad_logits.cast<double>(), d.grad_logits) < 1e-6);
}
