#include "xgan/alignment.hpp"

#include "xgan/errors.hpp"

namespace xgan {

template <typename T>
AlignMap<T> build_align(std::size_t latent, ParameterStore<T>& store, const Rng& init, const std::string& name) {
  return {build_network(mlp_spec(latent, {}, latent, Activation::relu, Activation::tanh), name, store, init)};
}

template <typename T>
Tensor<T> align(ParameterStore<T>& store, const AlignMap<T>& map, const Tensor<T>& z_bar,
                const ForwardOptions<T>& opts) {
  const std::size_t j = map.net.spec().input_shape.at(0);
  if (z_bar.rank() != 2 || z_bar.dim(1) != j)
    throw ShapeError("align: code " + shape_str(z_bar.shape()) + " does not have " + std::to_string(j) + " columns");
  return map.net.forward(store, z_bar, opts);
}

template <typename T>
Tensor<T> alignment_loss(const Tensor<T>& z, const Tensor<T>& z_aligned, const AlignmentConfig& cfg) {
  if (!(cfg.tau > 0.0)) throw ConfigError("alignment_loss: tau must be positive");
  if (z.rank() != 2 || z.dim(0) == 0) throw ContractError("alignment_loss: empty batch " + shape_str(z.shape()));
  if (z.shape() != z_aligned.shape())
    throw ShapeError("alignment_loss: " + shape_str(z.shape()) + " vs " + shape_str(z_aligned.shape()));
  const Tensor<T> d2 = sum_rows(square(sub(z, z_aligned)));
  // tau + mean(max(d2 - tau, 0)): a fully floored batch yields tau exactly.
  const T tau = static_cast<T>(cfg.tau);
  return add_scalar(mean(maximum(add_scalar(d2, -tau), T(0))), tau);
}

#define XGAN_INSTANTIATE_ALIGN(T)                                                                        \
  template AlignMap<T> build_align(std::size_t, ParameterStore<T>&, const Rng&, const std::string&);     \
  template Tensor<T> align(ParameterStore<T>&, const AlignMap<T>&, const Tensor<T>&,                     \
                           const ForwardOptions<T>&);                                                    \
  template Tensor<T> alignment_loss(const Tensor<T>&, const Tensor<T>&, const AlignmentConfig&);

XGAN_INSTANTIATE_ALIGN(float)
XGAN_INSTANTIATE_ALIGN(double)

}  // namespace xgan
