#pragma once
// Cross-view alignment: a J -> J tanh layer mapping view-B codes into the
// view-A latent space, and the floored squared-distance loss.

#include "xgan/nn/network.hpp"

namespace xgan {

struct AlignmentConfig {
  double tau = 1.0;
};

template <typename T>
struct AlignMap {
  Network<T> net;  // one dense layer, tanh
};

/// Slots "<name>.l0.weight" [J x J] and "<name>.l0.bias" [J].
template <typename T>
AlignMap<T> build_align(std::size_t latent, ParameterStore<T>& store, const Rng& init,
                        const std::string& name = "align");

/// tanh(z_bar W + b).
template <typename T>
Tensor<T> align(ParameterStore<T>& store, const AlignMap<T>& map, const Tensor<T>& z_bar,
                const ForwardOptions<T>& opts = {});

/// Batch mean of max(||z_i - z_aligned_i||^2, tau). The adjoint flows for
/// pairs with d^2 >= tau.
template <typename T>
Tensor<T> alignment_loss(const Tensor<T>& z, const Tensor<T>& z_aligned, const AlignmentConfig& cfg = {});

}  // namespace xgan
