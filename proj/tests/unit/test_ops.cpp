#include <cmath>
#include <limits>

#include "../common/grad_cases.hpp"
#include "doctest.h"
#include "xgan/errors.hpp"

using namespace xgan;
using xgan::testing::randn;

namespace {

// Direct-loop convolution, NCHW, symmetric zero padding.
std::vector<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& k, std::size_t s, std::size_t p) {
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t o = k.dim(0), kh = k.dim(2), kw = k.dim(3);
  const std::size_t oh = (h + 2 * p - kh) / s + 1, ow = (w + 2 * p - kw) / s + 1;
  std::vector<double> y(n * o * oh * ow, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t oc = 0; oc < o; ++oc)
      for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
          double acc = 0;
          for (std::size_t ic = 0; ic < c; ++ic)
            for (std::size_t u = 0; u < kh; ++u)
              for (std::size_t v = 0; v < kw; ++v) {
                const long yy = long(i * s + u) - long(p), xx = long(j * s + v) - long(p);
                if (yy < 0 || xx < 0 || yy >= long(h) || xx >= long(w)) continue;
                acc += x.at(((b * c + ic) * h + yy) * w + xx) * k.at(((oc * c + ic) * kh + u) * kw + v);
              }
          y[((b * o + oc) * oh + i) * ow + j] = acc;
        }
  return y;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.at(i) * b.at(i);
  return s;
}

}  // namespace

TEST_CASE("every op passes a central-difference gradient check") {
  for (const auto& gc : xgan::testing::op_cases()) {
    const GradCheckReport r = grad_check(gc.f, gc.params);
    INFO(gc.name << ": " << r.summary());
    CHECK(r.pass());
  }
}

TEST_CASE("conv2d matches direct convolution") {
  for (auto [s, p] : {std::pair<std::size_t, std::size_t>{1, 0}, {1, 2}, {2, 1}, {3, 0}}) {
    const auto x = randn({2, 3, 7, 6}, 1), k = randn({4, 3, 3, 3}, 2);
    const auto y = conv2d(x, k, {s, p, 0});
    const auto ref = conv_oracle(x, k, s, p);
    REQUIRE(y.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(y.at(i) == doctest::Approx(ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("conv2d_transpose is the adjoint of conv2d") {
  // <conv(x), y> == <x, conv_t(y)> for the same kernel and geometry.
  const auto k = randn({3, 2, 5, 5}, 3);
  const auto x = randn({2, 2, 8, 8}, 4);
  const auto cx = conv2d(x, k, {2, 2, 0});
  const auto y = randn(cx.shape(), 5);
  const auto ty = conv2d_transpose(y, k, {2, 2, 1});
  REQUIRE(ty.shape() == x.shape());
  CHECK(dot(cx, y) == doctest::Approx(dot(x, ty)).epsilon(1e-12));
}

TEST_CASE("conv2d_transpose doubles the spatial size with the generator geometry") {
  const auto x = randn({1, 4, 4, 4}, 6);
  CHECK(conv2d_transpose(x, randn({4, 2, 5, 5}, 7), {2, 2, 1}).shape() == Shape{1, 2, 8, 8});
  CHECK(conv2d_transpose(x, randn({4, 2, 3, 3}, 8), {2, 1, 1}).shape() == Shape{1, 2, 8, 8});
}

TEST_CASE("maxpool picks the lowest index among ties") {
  Tape<double> tape;
  auto x = tape.leaf("x", Tensor<double>({1, 1, 2, 2}, {1.0, 1.0, 1.0, 1.0}));
  auto g = tape.backward(sum(maxpool2d(x, 2, 2)));
  CHECK(g.at("x").at(0) == 1.0);
  CHECK(g.at("x").at(1) == 0.0);
  CHECK(g.at("x").at(3) == 0.0);
}

TEST_CASE("batchnorm normalises per channel and blends running statistics") {
  std::vector<double> mean{0.0, 0.0}, var{1.0, 1.0};
  BatchNormOptions<double> o;
  o.running_mean = mean;
  o.running_var = var;
  // Channel 0 holds 1,3 ; channel 1 holds 2,6 (N=2, C=2).
  const Tensor<double> x({2, 2}, {1.0, 2.0, 3.0, 6.0});
  const auto y = batchnorm(x, Tensor<double>::full({2}, 1.0), Tensor<double>::zeros({2}), o);
  CHECK(y.at(0) == doctest::Approx(-1.0).epsilon(1e-5));
  CHECK(y.at(2) == doctest::Approx(1.0).epsilon(1e-5));
  CHECK(mean[0] == doctest::Approx(0.1 * 2.0));
  CHECK(mean[1] == doctest::Approx(0.1 * 4.0));
  CHECK(var[0] == doctest::Approx(0.9 + 0.1 * 1.0));  // biased batch variance
  CHECK(var[1] == doctest::Approx(0.9 + 0.1 * 4.0));

  o.mode = BatchNormMode::eval;
  const auto e = batchnorm(x, Tensor<double>::full({2}, 1.0), Tensor<double>::zeros({2}), o);
  CHECK(e.at(0) == doctest::Approx((1.0 - mean[0]) / std::sqrt(var[0] + 1e-5)));
}

TEST_CASE("ops report shape mismatches with the op name") {
  const auto a = randn({2, 3}, 1), b = randn({3, 2}, 2);
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("add"), ShapeError);
  CHECK_THROWS_AS(matmul(a, a), ShapeError);
  CHECK_THROWS_AS(conv2d(randn({1, 2, 4, 4}, 3), randn({1, 3, 3, 3}, 4)), ShapeError);
  CHECK_THROWS_AS(conv2d(randn({1, 1, 2, 2}, 3), randn({1, 1, 3, 3}, 4)), ShapeError);
  CHECK_THROWS_AS(conv2d_transpose(randn({1, 1, 2, 2}, 3), randn({1, 1, 3, 3}, 4), {2, 0, 2}), ShapeError);
  CHECK_THROWS_AS(maxpool2d(randn({1, 1, 1, 1}, 3), 2, 2), ShapeError);
  CHECK_THROWS_AS(slice(a, 1, 2, 5), ShapeError);
  CHECK_THROWS_AS(reshape(a, {4}), ShapeError);
  CHECK_THROWS_AS(concat<double>({a, b}, 1), ShapeError);
}

TEST_CASE("non-finite results raise NumericError naming the op") {
  const Tensor<double> x({1}, {1000.0});
  CHECK_THROWS_WITH_AS(exp(x), doctest::Contains("exp"), NumericError);
  CHECK_THROWS_AS(log(Tensor<double>({1}, {-1.0})), NumericError);
}

TEST_CASE("float and double ops agree") {
  const auto xd = randn({2, 3, 6, 6}, 9), kd = randn({4, 3, 3, 3}, 10);
  std::vector<float> xf(xd.data().begin(), xd.data().end()), kf(kd.data().begin(), kd.data().end());
  const auto yd = conv2d(xd, kd, {1, 1, 0});
  const auto yf = conv2d(Tensor<float>(xd.shape(), xf), Tensor<float>(kd.shape(), kf), {1, 1, 0});
  for (std::size_t i = 0; i < yd.size(); ++i) CHECK(yf.at(i) == doctest::Approx(yd.at(i)).epsilon(1e-4));
}

TEST_CASE("sample_standard_normal is reproducible and rejects empty shapes") {
  Rng r1(4, 2), r2(4, 2);
  const auto a = sample_standard_normal<float>(r1, {3, 3});
  const auto b = sample_standard_normal<float>(r2, {3, 3});
  CHECK(std::vector<float>(a.data().begin(), a.data().end()) == std::vector<float>(b.data().begin(), b.data().end()));
  CHECK_THROWS_AS(sample_standard_normal<float>(r1, {0}), ContractError);
}
