#include <cmath>

#include "../common/grad_cases.hpp"
#include "doctest.h"
#include "xgan/errors.hpp"

using namespace xgan;

TEST_CASE("alignment loss floors each pair at tau") {
  const Tensor<double> z({3, 2}, {0, 0, 1, 1, 0, 0});
  const Tensor<double> za({3, 2}, {0.1, 0, 1, 1, 3, 4});
  // Squared distances 0.01, 0, 25 -> floored 1, 1, 25.
  CHECK(alignment_loss(z, za, {1.0}).item() == doctest::Approx(27.0 / 3.0));
  CHECK(alignment_loss(z, za, {1e-6}).item() == doctest::Approx(25.01 / 3.0));
  CHECK_THROWS_AS(alignment_loss(z, za, {0.0}), ConfigError);
  CHECK_THROWS_AS(alignment_loss(z, Tensor<double>::zeros({3, 3})), ShapeError);
}

TEST_CASE("alignment loss reference values") {
  const Tensor<double> z({1, 2}, {0, 0});
  CHECK(alignment_loss(z, z, {1.0}).item() == 1.0);
  CHECK(alignment_loss(z, Tensor<double>({1, 2}, {0, 2}), {1.0}).item() == doctest::Approx(4.0));
  const Tensor<double> two({2, 1}, {0, 0});
  CHECK(alignment_loss(two, Tensor<double>({2, 1}, {0.5, 3.0}), {1.0}).item() == doctest::Approx(5.0));
}

TEST_CASE("alignment loss never drops below tau") {
  Rng rng(11, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const double tau = rng.uniform(0.0, 2.0);
    std::vector<double> a(8), b(8);
    for (std::size_t i = 0; i < 8; ++i) {
      a[i] = rng.uniform(-1, 1);
      b[i] = a[i] + rng.uniform(-0.3, 0.3);
    }
    const auto l = alignment_loss(Tensor<double>({4, 2}, a), Tensor<double>({4, 2}, b), {tau}).item();
    CHECK(l >= tau - 1e-12);
  }
}

TEST_CASE("pairs under the floor receive no gradient") {
  Tape<double> tape;
  auto z = tape.leaf("z", Tensor<double>({2, 1}, {0.0, 0.0}));
  auto za = tape.leaf("za", Tensor<double>({2, 1}, {0.5, 2.0}));
  auto g = tape.backward(alignment_loss(z, za, {1.0}));
  CHECK(g.at("za").at(0) == 0.0);
  // d/dza of (za - z)^2 / N for the second pair.
  CHECK(g.at("za").at(1) == doctest::Approx(2.0 * 2.0 / 2.0));
  CHECK(g.at("z").at(1) == doctest::Approx(-2.0));
}

TEST_CASE("align map is one tanh layer from J to J") {
  ParameterStore<double> store;
  const auto map = build_align<double>(6, store, Rng(3));
  CHECK(store.contains("align.l0.weight"));
  CHECK(store.value("align.l0.weight").shape() == Shape{6, 6});
  CHECK(store.value("align.l0.bias").shape() == Shape{6});
  const auto zb = testing::randn({5, 6}, 4, 3.0);
  const auto out = align(store, map, zb);
  REQUIRE(out.shape() == Shape{5, 6});
  // Oracle: tanh(z W + b).
  const auto& w = store.value("align.l0.weight");
  const auto& b = store.value("align.l0.bias");
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      double acc = b.at(j);
      for (std::size_t p = 0; p < 6; ++p) acc += zb.at(i * 6 + p) * w.at(p * 6 + j);
      CHECK(out.at(i * 6 + j) == doctest::Approx(std::tanh(acc)));
      CHECK(std::abs(out.at(i * 6 + j)) < 1.0);
    }
}

TEST_CASE("a zero map sends every code to zero") {
  ParameterStore<double> store;
  const auto map = build_align<double>(4, store, Rng(1));
  for (const auto& id : store.slot_ids())
    for (double& v : store.mutable_value(id)) v = 0.0;
  const auto out = align(store, map, testing::randn({3, 4}, 5));
  for (double v : out.data()) CHECK(v == 0.0);
  CHECK_THROWS_AS(align(store, map, testing::randn({3, 5}, 5)), ShapeError);
}

TEST_CASE("tanh is 1-Lipschitz") {
  Rng rng(21, 21);
  for (int t = 0; t < 500; ++t) {
    std::vector<double> a(5), b(5);
    for (auto& v : a) v = rng.uniform(-4, 4);
    for (auto& v : b) v = rng.uniform(-4, 4);
    const auto ta = tanh(Tensor<double>({5}, a)), tb = tanh(Tensor<double>({5}, b));
    double num = 0, den = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      num += (ta.at(i) - tb.at(i)) * (ta.at(i) - tb.at(i));
      den += (a[i] - b[i]) * (a[i] - b[i]);
    }
    CHECK(std::sqrt(num) <= std::sqrt(den) + 1e-15);
  }
}

TEST_CASE("alignment loss gradients pass the finite-difference check") {
  for (const auto& gc : testing::model_cases()) {
    if (gc.name != "l_align") continue;
    const auto r = grad_check(gc.f, gc.params);
    INFO(r.summary());
    CHECK(r.pass());
  }
}
