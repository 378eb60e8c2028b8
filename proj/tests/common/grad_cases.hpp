#pragma once
// Gradient-check cases shared by the unit and acceptance suites: one per
// tensor op, plus the model losses on tiny networks.

#include <functional>
#include <string>
#include <vector>

#include "xgan/alignment.hpp"
#include "xgan/crossgan/losses.hpp"
#include "xgan/grad_check.hpp"
#include "xgan/nn/network.hpp"
#include "xgan/ops.hpp"
#include "xgan/vae.hpp"

namespace xgan::testing {

struct GradCase {
  std::string name;
  ScalarFn f;
  ParamMap params;
  /// Trainable scalars involved; kept under 1000.
  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& [k, v] : params) n += v.size();
    return n;
  }
};

inline Tensor<double> randn(const Shape& shape, std::uint64_t stream, double scale = 1.0, double shift = 0.0) {
  Rng rng(2024, stream);
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = shift + scale * rng.normal();
  return Tensor<double>(shape, std::move(v));
}

/// Values bounded away from zero, so kinks stay out of the difference stencil.
inline Tensor<double> away_from_zero(const Shape& shape, std::uint64_t stream) {
  Rng rng(77, stream);
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.2, 1.5);
  return Tensor<double>(shape, std::move(v));
}

/// Distinct values: no ties inside a pooling window.
inline Tensor<double> distinct(const Shape& shape, std::uint64_t stream) {
  Rng rng(5, stream);
  const std::size_t n = shape_size(shape);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 0.1 * static_cast<double>(i);
  for (std::size_t i = n; i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
  return Tensor<double>(shape, std::move(v));
}

/// A random linear read-out so every output element gets its own adjoint.
inline Tensor<double> probe(const Tensor<double>& y, std::uint64_t stream = 999) {
  return sum(mul(y, randn(y.shape(), stream)));
}

inline std::vector<GradCase> op_cases() {
  std::vector<GradCase> c;
  auto unary = [&](std::string name, Tensor<double> x, std::function<Tensor<double>(const Tensor<double>&)> op) {
    c.push_back({std::move(name), [op](const ParamMap& p) { return probe(op(p.at("x"))); }, {{"x", std::move(x)}}});
  };
  auto binary = [&](std::string name, Tensor<double> a, Tensor<double> b,
                    std::function<Tensor<double>(const Tensor<double>&, const Tensor<double>&)> op) {
    c.push_back({std::move(name), [op](const ParamMap& p) { return probe(op(p.at("a"), p.at("b"))); },
                 {{"a", std::move(a)}, {"b", std::move(b)}}});
  };

  binary("add", randn({3, 4}, 1), randn({3, 4}, 2), [](auto& a, auto& b) { return add(a, b); });
  binary("sub", randn({3, 4}, 3), randn({3, 4}, 4), [](auto& a, auto& b) { return sub(a, b); });
  binary("mul", randn({3, 4}, 5), randn({3, 4}, 6), [](auto& a, auto& b) { return mul(a, b); });
  unary("scale", randn({5}, 7), [](auto& x) { return scale(x, -2.5); });
  unary("add_scalar", randn({5}, 8), [](auto& x) { return add_scalar(x, 0.75); });
  binary("add_bias", randn({2, 3, 2, 2}, 9), randn({3}, 10), [](auto& a, auto& b) { return add_bias(a, b); });
  binary("matmul", randn({3, 4}, 11), randn({4, 5}, 12), [](auto& a, auto& b) { return matmul(a, b); });
  binary("conv2d", randn({2, 2, 5, 5}, 13), randn({3, 2, 3, 3}, 14),
         [](auto& x, auto& k) { return conv2d(x, k, {1, 1, 0}); });
  binary("conv2d_strided", randn({2, 2, 6, 6}, 15), randn({2, 2, 3, 3}, 16),
         [](auto& x, auto& k) { return conv2d(x, k, {2, 0, 0}); });
  binary("conv2d_transpose", randn({2, 3, 3, 3}, 17), randn({3, 2, 3, 3}, 18),
         [](auto& x, auto& k) { return conv2d_transpose(x, k, {2, 1, 1}); });
  binary("conv2d_transpose_k5", randn({1, 2, 2, 2}, 19), randn({2, 2, 5, 5}, 20),
         [](auto& x, auto& k) { return conv2d_transpose(x, k, {2, 2, 1}); });
  unary("maxpool2d", distinct({2, 2, 4, 4}, 21), [](auto& x) { return maxpool2d(x, 2, 2); });

  c.push_back({"batchnorm_train",
               [](const ParamMap& p) {
                 BatchNormOptions<double> o;
                 o.update_running = false;
                 return probe(batchnorm(p.at("x"), p.at("gamma"), p.at("beta"), o));
               },
               {{"x", randn({4, 3, 2, 2}, 22)}, {"gamma", randn({3}, 23, 0.3, 1.0)}, {"beta", randn({3}, 24)}}});
  c.push_back({"batchnorm_dense",
               [](const ParamMap& p) {
                 BatchNormOptions<double> o;
                 o.update_running = false;
                 return probe(batchnorm(p.at("x"), p.at("gamma"), p.at("beta"), o));
               },
               {{"x", randn({5, 4}, 25)}, {"gamma", randn({4}, 26, 0.3, 1.0)}, {"beta", randn({4}, 27)}}});
  c.push_back({"batchnorm_eval",
               [](const ParamMap& p) {
                 static std::vector<double> mean{0.1, -0.2, 0.3}, var{1.5, 0.5, 2.0};
                 BatchNormOptions<double> o;
                 o.mode = BatchNormMode::eval;
                 o.running_mean = mean;
                 o.running_var = var;
                 return probe(batchnorm(p.at("x"), p.at("gamma"), p.at("beta"), o));
               },
               {{"x", randn({2, 3, 2, 2}, 28)}, {"gamma", randn({3}, 29, 0.3, 1.0)}, {"beta", randn({3}, 30)}}});

  unary("relu", away_from_zero({3, 4}, 31), [](auto& x) { return relu(x); });
  unary("leaky_relu", away_from_zero({3, 4}, 32), [](auto& x) { return leaky_relu(x, 0.2); });
  unary("tanh", randn({3, 4}, 33), [](auto& x) { return tanh(x); });
  unary("sigmoid", randn({3, 4}, 34), [](auto& x) { return sigmoid(x); });
  unary("log", randn({3, 4}, 35, 0.2, 1.5), [](auto& x) { return log(x); });
  unary("exp", randn({3, 4}, 36), [](auto& x) { return exp(x); });
  unary("square", randn({3, 4}, 37), [](auto& x) { return square(x); });
  unary("maximum", away_from_zero({3, 4}, 38), [](auto& x) { return maximum(x, 0.0); });
  unary("clamp", away_from_zero({3, 4}, 39), [](auto& x) { return clamp(x, -1.0, 1.0 + 1e-3); });
  unary("sum", randn({3, 4}, 40), [](auto& x) { return square(sum(x)); });
  unary("mean", randn({3, 4}, 41), [](auto& x) { return square(mean(x)); });
  unary("sum_rows", randn({3, 2, 2}, 42), [](auto& x) { return sum_rows(x); });
  unary("mean_rows", randn({3, 2, 2}, 43), [](auto& x) { return mean_rows(x); });
  binary("concat_axis0", randn({2, 3}, 44), randn({1, 3}, 45),
         [](auto& a, auto& b) { return concat<double>({a, b}, 0); });
  binary("concat_axis1", randn({2, 3}, 46), randn({2, 2}, 47),
         [](auto& a, auto& b) { return concat<double>({a, b}, 1); });
  unary("slice", randn({3, 5}, 48), [](auto& x) { return slice(x, 1, 1, 4); });
  unary("reshape", randn({2, 6}, 49), [](auto& x) { return reshape(x, {3, 4}); });
  return c;
}

/// Copies the given values into the store so that untracked evaluations see
/// them; tracked evaluations pick up the existing tape leaves by slot id.
inline Tape<double>* load(ParameterStore<double>& store, const ParamMap& p) {
  Tape<double>* tape = nullptr;
  for (const auto& [name, t] : p) {
    store.slot(name).value = t.detach();
    if (t.tracked()) tape = t.tape();
  }
  return tape;
}

inline ParamMap trainables(const ParameterStore<double>& store, const std::string& prefix = "") {
  ParamMap p;
  for (const auto& [id, s] : store.slots())
    if (s.trainable && id.rfind(prefix, 0) == 0) p.emplace(id, s.value);
  return p;
}

/// VAE, alignment and adversarial losses on networks small enough for an
/// exhaustive central-difference check.
inline std::vector<GradCase> model_cases() {
  std::vector<GradCase> c;
  const Rng init(3, 1);

  {
    auto store = std::make_shared<ParameterStore<double>>();
    auto va = std::make_shared<VaeNets<double>>(build_vae<double>(3, 2, {4}, View::A, "vae_a", *store, init));
    auto vb = std::make_shared<VaeNets<double>>(build_vae<double>(3, 2, {4}, View::B, "vae_b", *store, init));
    for (auto& [id, s] : store->slots()) {
      if (id.find("weight") == std::string::npos) continue;
      for (auto& e : store->mutable_value(id)) e *= 25.0;
    }
    const auto x = randn({4, 3}, 60), xb = randn({4, 3}, 61);
    c.push_back({"l_vae",
                 [=](const ParamMap& p) {
                   ForwardOptions<double> o{load(*store, p)};
                   Rng ra(9, 1), rb(9, 2);
                   return vae_loss_pair(*store, *va, *vb, x, xb, ra, rb, o).total;
                 },
                 trainables(*store)});
  }
  {
    auto store = std::make_shared<ParameterStore<double>>();
    auto map = std::make_shared<AlignMap<double>>(build_align<double>(3, *store, init));
    // tau small enough that every pair is above the floor and gets an adjoint.
    const auto z = randn({4, 3}, 62), zb = randn({4, 3}, 63);
    c.push_back({"l_align",
                 [=](const ParamMap& p) {
                   ForwardOptions<double> o{load(*store, p)};
                   return alignment_loss(z, align(*store, *map, zb, o), AlignmentConfig{0.01});
                 },
                 trainables(*store)});
  }
  {
    // Image-shaped twins: conv generator with batchnorm, conv discriminator.
    auto store = std::make_shared<ParameterStore<double>>();
    const NetSpec gs = generator_spec(2, 1, 8, 2);
    const NetSpec ds = discriminator_spec(1, 8, 2, 3);
    auto g = std::make_shared<std::pair<Network<double>, Network<double>>>(
        build_generator_pair<double>(gs, {4, 1}, *store, init));
    auto d = std::make_shared<std::pair<Network<double>, Network<double>>>(
        build_discriminator_pair<double>(ds, {4, 1}, *store, init));
    // Scale the small init up so the losses are not flat.
    for (auto& [id, s] : store->slots()) {
      if (!s.trainable || id.find("weight") == std::string::npos) continue;
      auto v = store->mutable_value(id);
      for (auto& e : v) e *= 25.0;
    }
    const auto x = randn({4, 1, 8, 8}, 64, 0.5), xb = randn({4, 1, 8, 8}, 65, 0.5);
    const auto zx = randn({4, 2}, 66), zxb = randn({4, 2}, 67);
    for (const auto& [which, objective] :
         std::vector<std::pair<std::string, GeneratorObjective>>{{"d", GeneratorObjective::non_saturating},
                                                                 {"g", GeneratorObjective::non_saturating},
                                                                 {"g_saturating", GeneratorObjective::saturating},
                                                                 {"g_feature_matching",
                                                                  GeneratorObjective::feature_matching}}) {
      const bool disc = which == "d";
      const GeneratorObjective obj = objective;
      c.push_back({"l_gan_" + which + "_conv",
                   [=](const ParamMap& p) {
                     ForwardOptions<double> o{load(*store, p), BatchNormMode::train, false};
                     auto l = gan_loss_pair(*store, d->first, d->second, g->first, g->second, x, xb, zx, zxb, o, obj);
                     return disc ? l.d_loss : l.g_loss;
                   },
                   trainables(*store, disc ? "f" : "g")});
    }
  }
  return c;
}

}  // namespace xgan::testing
