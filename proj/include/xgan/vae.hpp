#pragma once
// Per-view variational auto-encoders with a standard normal prior and a
// unit-variance Gaussian decoder.

#include <cstddef>

#include "xgan/nn/network.hpp"

namespace xgan {

enum class View { A, B };

template <typename T>
struct GaussianPosterior {
  Tensor<T> mu;       // [N, J]
  Tensor<T> log_var;  // [N, J]
};

template <typename T>
struct LatentCode {
  Tensor<T> z;  // [N, J]
  View view = View::A;
};

/// Encoder maps a flattened sample to 2J outputs (mu then log-variance);
/// decoder maps J back to the flattened sample.
template <typename T>
struct VaeNets {
  Network<T> encoder;
  Network<T> decoder;
  std::size_t latent = 0;
  View view = View::A;
};

/// Encoder/decoder MLPs with the given hidden widths and ReLU, registered
/// under "<prefix>.enc" and "<prefix>.dec".
template <typename T>
VaeNets<T> build_vae(std::size_t data_dim, std::size_t latent, const std::vector<std::size_t>& hidden, View view,
                     const std::string& prefix, ParameterStore<T>& store, const Rng& init);

template <typename T>
GaussianPosterior<T> encode(ParameterStore<T>& store, const VaeNets<T>& vae, const Tensor<T>& x,
                            const ForwardOptions<T>& opts = {});

/// z = mu + exp(log_var / 2) * eps with eps ~ N(0, I) drawn from rng.
template <typename T>
LatentCode<T> reparameterize(const GaussianPosterior<T>& post, Rng& rng, View view = View::A);

/// Reconstruction with the same shape as the decoder's flat output.
template <typename T>
Tensor<T> decode(ParameterStore<T>& store, const VaeNets<T>& vae, const Tensor<T>& z,
                 const ForwardOptions<T>& opts = {});

/// Batch mean of -1/2 sum_j (1 + log_var - mu^2 - exp(log_var)).
template <typename T>
Tensor<T> kl_to_standard_normal(const GaussianPosterior<T>& post);

/// Batch mean of 1/2 ||x - x_hat||^2. Shapes must match up to flattening.
template <typename T>
Tensor<T> reconstruction_loss(const Tensor<T>& x_hat, const Tensor<T>& x);

template <typename T>
struct VaeLoss {
  Tensor<T> total;  // loss_a + loss_b
  Tensor<T> loss_a;
  Tensor<T> loss_b;
  GaussianPosterior<T> post_a;
  GaussianPosterior<T> post_b;
};

/// Mean over the M pairs of the per-view (KL + reconstruction) losses,
/// summed over the two views. Each view draws its noise from its own rng.
template <typename T>
VaeLoss<T> vae_loss_pair(ParameterStore<T>& store, const VaeNets<T>& vae_a, const VaeNets<T>& vae_b,
                         const Tensor<T>& x, const Tensor<T>& x_bar, Rng& rng_a, Rng& rng_b,
                         const ForwardOptions<T>& opts = {});

/// The single-view term of vae_loss_pair.
template <typename T>
Tensor<T> vae_loss(ParameterStore<T>& store, const VaeNets<T>& vae, const Tensor<T>& x, Rng& rng,
                   const ForwardOptions<T>& opts = {}, GaussianPosterior<T>* post_out = nullptr);

}  // namespace xgan
