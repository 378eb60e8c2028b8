#include "xgan/vae.hpp"

#include "xgan/errors.hpp"

namespace xgan {

template <typename T>
VaeNets<T> build_vae(std::size_t data_dim, std::size_t latent, const std::vector<std::size_t>& hidden, View view,
                     const std::string& prefix, ParameterStore<T>& store, const Rng& init) {
  std::vector<std::size_t> rev(hidden.rbegin(), hidden.rend());
  VaeNets<T> v;
  v.encoder = build_network(mlp_spec(data_dim, hidden, 2 * latent), prefix + ".enc", store, init);
  v.decoder = build_network(mlp_spec(latent, rev, data_dim), prefix + ".dec", store, init);
  v.latent = latent;
  v.view = view;
  return v;
}

template <typename T>
GaussianPosterior<T> encode(ParameterStore<T>& store, const VaeNets<T>& vae, const Tensor<T>& x,
                            const ForwardOptions<T>& opts) {
  const Tensor<T> h = vae.encoder.forward(store, x, opts);
  return {slice(h, 1, 0, vae.latent), slice(h, 1, vae.latent, 2 * vae.latent)};
}

template <typename T>
LatentCode<T> reparameterize(const GaussianPosterior<T>& post, Rng& rng, View view) {
  if (post.mu.shape() != post.log_var.shape())
    throw ShapeError("reparameterize: mu " + shape_str(post.mu.shape()) + " vs log_var " +
                     shape_str(post.log_var.shape()));
  const Tensor<T> eps = sample_standard_normal<T>(rng, post.mu.shape());
  const Tensor<T> sigma = exp(scale(post.log_var, T(0.5)));
  return {add(post.mu, mul(sigma, eps)), view};
}

template <typename T>
Tensor<T> decode(ParameterStore<T>& store, const VaeNets<T>& vae, const Tensor<T>& z, const ForwardOptions<T>& opts) {
  return vae.decoder.forward(store, z, opts);
}

template <typename T>
Tensor<T> kl_to_standard_normal(const GaussianPosterior<T>& post) {
  if (post.mu.shape() != post.log_var.shape() || post.mu.rank() != 2)
    throw ShapeError("kl_to_standard_normal: mu " + shape_str(post.mu.shape()) + " vs log_var " +
                     shape_str(post.log_var.shape()));
  // 1/2 sum (mu^2 + exp(lv) - 1 - lv), averaged over rows.
  const Tensor<T> inner = sub(add(square(post.mu), exp(post.log_var)), add_scalar(post.log_var, T(1)));
  return scale(sum(inner), T(0.5) / static_cast<T>(post.mu.dim(0)));
}

template <typename T>
Tensor<T> reconstruction_loss(const Tensor<T>& x_hat, const Tensor<T>& x) {
  if (x_hat.size() != x.size() || x.rank() == 0 || x_hat.rank() == 0 || x.dim(0) != x_hat.dim(0))
    throw ShapeError("reconstruction_loss: shape mismatch " + shape_str(x_hat.shape()) + " vs " +
                     shape_str(x.shape()));
  const Tensor<T> xf = x.shape() == x_hat.shape() ? x : reshape(x, x_hat.shape());
  return scale(sum(square(sub(x_hat, xf))), T(0.5) / static_cast<T>(x.dim(0)));
}

template <typename T>
Tensor<T> vae_loss(ParameterStore<T>& store, const VaeNets<T>& vae, const Tensor<T>& x, Rng& rng,
                   const ForwardOptions<T>& opts, GaussianPosterior<T>* post_out) {
  if (x.rank() == 0 || x.dim(0) == 0) throw ContractError("vae_loss: empty batch");
  GaussianPosterior<T> post = encode(store, vae, x, opts);
  const LatentCode<T> code = reparameterize(post, rng, vae.view);
  const Tensor<T> loss = add(kl_to_standard_normal(post), reconstruction_loss(decode(store, vae, code.z, opts), x));
  if (post_out != nullptr) *post_out = std::move(post);
  return loss;
}

template <typename T>
VaeLoss<T> vae_loss_pair(ParameterStore<T>& store, const VaeNets<T>& vae_a, const VaeNets<T>& vae_b,
                         const Tensor<T>& x, const Tensor<T>& x_bar, Rng& rng_a, Rng& rng_b,
                         const ForwardOptions<T>& opts) {
  if (x.rank() == 0 || x.dim(0) == 0) throw ContractError("vae_loss_pair: empty batch");
  if (x.dim(0) != x_bar.dim(0))
    throw ShapeError("vae_loss_pair: " + std::to_string(x.dim(0)) + " view-A samples vs " +
                     std::to_string(x_bar.dim(0)) + " view-B samples");
  VaeLoss<T> out;
  out.loss_a = vae_loss(store, vae_a, x, rng_a, opts, &out.post_a);
  out.loss_b = vae_loss(store, vae_b, x_bar, rng_b, opts, &out.post_b);
  out.total = add(out.loss_a, out.loss_b);
  return out;
}

#define XGAN_INSTANTIATE_VAE(T)                                                                                  \
  template VaeNets<T> build_vae(std::size_t, std::size_t, const std::vector<std::size_t>&, View,                 \
                                const std::string&, ParameterStore<T>&, const Rng&);                             \
  template GaussianPosterior<T> encode(ParameterStore<T>&, const VaeNets<T>&, const Tensor<T>&,                  \
                                       const ForwardOptions<T>&);                                                \
  template LatentCode<T> reparameterize(const GaussianPosterior<T>&, Rng&, View);                                \
  template Tensor<T> decode(ParameterStore<T>&, const VaeNets<T>&, const Tensor<T>&, const ForwardOptions<T>&);  \
  template Tensor<T> kl_to_standard_normal(const GaussianPosterior<T>&);                                         \
  template Tensor<T> reconstruction_loss(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> vae_loss(ParameterStore<T>&, const VaeNets<T>&, const Tensor<T>&, Rng&,                     \
                              const ForwardOptions<T>&, GaussianPosterior<T>*);                                  \
  template VaeLoss<T> vae_loss_pair(ParameterStore<T>&, const VaeNets<T>&, const VaeNets<T>&, const Tensor<T>&,  \
                                    const Tensor<T>&, Rng&, Rng&, const ForwardOptions<T>&);

XGAN_INSTANTIATE_VAE(float)
XGAN_INSTANTIATE_VAE(double)

}  // namespace xgan
