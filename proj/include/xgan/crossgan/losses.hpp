#pragma once
// Adversarial losses. Probabilities are clamped to [1e-7, 1 - 1e-7] before
// any log.

#include "xgan/nn/network.hpp"

namespace xgan {

inline constexpr double kProbClamp = 1e-7;

/// -mean log D(real) - mean log(1 - D(fake)) for one stream.
template <typename T>
Tensor<T> discriminator_loss(const Tensor<T>& p_real, const Tensor<T>& p_fake);

/// Non-saturating -mean log D(fake), or mean log(1 - D(fake)) when
/// `saturating` is set.
template <typename T>
Tensor<T> generator_loss(const Tensor<T>& p_fake, bool saturating = false);

/// ||mean_rows(real) - mean_rows(fake)||^2 over feature rows [N, F].
template <typename T>
Tensor<T> feature_matching_loss(const Tensor<T>& real_features, const Tensor<T>& fake_features);

enum class GeneratorObjective { non_saturating, saturating, feature_matching };

template <typename T>
struct GanLosses {
  Tensor<T> d_loss;  // d1 + d2
  Tensor<T> g_loss;  // g1 + g2
  Tensor<T> d1, d2, g1, g2;
};

/// Both streams' losses from one forward pass: g1(z_x) is judged by f1
/// against x, g2(z_xbar) by f2 against x_bar. Feature matching uses each
/// discriminator's penultimate layer.
template <typename T>
GanLosses<T> gan_loss_pair(ParameterStore<T>& store, const Network<T>& f1, const Network<T>& f2,
                           const Network<T>& g1, const Network<T>& g2, const Tensor<T>& x, const Tensor<T>& x_bar,
                           const Tensor<T>& z_x, const Tensor<T>& z_xbar, const ForwardOptions<T>& opts,
                           GeneratorObjective objective = GeneratorObjective::non_saturating);

}  // namespace xgan
