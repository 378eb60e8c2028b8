#include "xgan/crossgan/losses.hpp"

#include "xgan/errors.hpp"

namespace xgan {

namespace {

template <typename T>
Tensor<T> clamp_prob(const Tensor<T>& p) {
  return clamp(p, static_cast<T>(kProbClamp), static_cast<T>(1.0 - kProbClamp));
}

template <typename T>
Tensor<T> one_minus(const Tensor<T>& p) {
  return add_scalar(scale(p, T(-1)), T(1));
}

template <typename T>
struct StreamLoss {
  Tensor<T> d, g;
};

template <typename T>
StreamLoss<T> stream_loss(ParameterStore<T>& store, const Network<T>& f, const Network<T>& g, const Tensor<T>& real,
                          const Tensor<T>& z, const ForwardOptions<T>& opts, GeneratorObjective objective) {
  const Tensor<T> fake = g.forward(store, z, opts);
  std::vector<Tensor<T>> real_layers, fake_layers;
  const Tensor<T> p_real = f.forward(store, real, opts, &real_layers);
  const Tensor<T> p_fake = f.forward(store, fake, opts, &fake_layers);
  StreamLoss<T> out{discriminator_loss(p_real, p_fake), {}};
  if (objective == GeneratorObjective::feature_matching) {
    const std::size_t pen = real_layers.size() - 2;
    out.g = feature_matching_loss(real_layers[pen], fake_layers[pen]);
  } else {
    out.g = generator_loss(p_fake, objective == GeneratorObjective::saturating);
  }
  return out;
}

}  // namespace

template <typename T>
Tensor<T> discriminator_loss(const Tensor<T>& p_real, const Tensor<T>& p_fake) {
  if (p_real.size() == 0 || p_fake.size() == 0) throw ContractError("discriminator_loss: empty batch");
  const Tensor<T> real_term = mean(log(clamp_prob(p_real)));
  const Tensor<T> fake_term = mean(log(one_minus(clamp_prob(p_fake))));
  return scale(add(real_term, fake_term), T(-1));
}

template <typename T>
Tensor<T> generator_loss(const Tensor<T>& p_fake, bool saturating) {
  if (p_fake.size() == 0) throw ContractError("generator_loss: empty batch");
  if (saturating) return mean(log(one_minus(clamp_prob(p_fake))));
  return scale(mean(log(clamp_prob(p_fake))), T(-1));
}

template <typename T>
Tensor<T> feature_matching_loss(const Tensor<T>& real_features, const Tensor<T>& fake_features) {
  if (real_features.rank() < 2 || fake_features.rank() < 2 || real_features.size() / real_features.dim(0) !=
                                                                   fake_features.size() / fake_features.dim(0))
    throw ShapeError("feature_matching_loss: " + shape_str(real_features.shape()) + " vs " +
                     shape_str(fake_features.shape()));
  return sum(square(sub(mean_rows(real_features), mean_rows(fake_features))));
}

template <typename T>
GanLosses<T> gan_loss_pair(ParameterStore<T>& store, const Network<T>& f1, const Network<T>& f2,
                           const Network<T>& g1, const Network<T>& g2, const Tensor<T>& x, const Tensor<T>& x_bar,
                           const Tensor<T>& z_x, const Tensor<T>& z_xbar, const ForwardOptions<T>& opts,
                           GeneratorObjective objective) {
  const StreamLoss<T> s1 = stream_loss(store, f1, g1, x, z_x, opts, objective);
  const StreamLoss<T> s2 = stream_loss(store, f2, g2, x_bar, z_xbar, opts, objective);
  return {add(s1.d, s2.d), add(s1.g, s2.g), s1.d, s2.d, s1.g, s2.g};
}

#define XGAN_INSTANTIATE_LOSSES(T)                                                                              \
  template Tensor<T> discriminator_loss(const Tensor<T>&, const Tensor<T>&);                                    \
  template Tensor<T> generator_loss(const Tensor<T>&, bool);                                                    \
  template Tensor<T> feature_matching_loss(const Tensor<T>&, const Tensor<T>&);                                 \
  template GanLosses<T> gan_loss_pair(ParameterStore<T>&, const Network<T>&, const Network<T>&,                 \
                                      const Network<T>&, const Network<T>&, const Tensor<T>&, const Tensor<T>&, \
                                      const Tensor<T>&, const Tensor<T>&, const ForwardOptions<T>&,             \
                                      GeneratorObjective);

XGAN_INSTANTIATE_LOSSES(float)
XGAN_INSTANTIATE_LOSSES(double)

}  // namespace xgan
