#include "xgan/nn/network.hpp"

#include "xgan/errors.hpp"

namespace xgan {

template <typename T>
Network<T>::Network(std::string name, NetSpec spec, std::vector<std::string> layer_names)
    : name_(std::move(name)), spec_(std::move(spec)), layer_names_(std::move(layer_names)) {
  if (layer_names_.size() != spec_.depth())
    throw ContractError("network '" + name_ + "': " + std::to_string(layer_names_.size()) + " layer names for " +
                        std::to_string(spec_.depth()) + " layers");
  spec_.output_shape();
}

template <typename T>
std::vector<std::string> Network<T>::layer_params(std::size_t i) const {
  const LayerDesc& l = spec_.layers.at(i);
  const std::string& p = layer_names_.at(i);
  std::vector<std::string> names{p + ".weight"};
  if (l.has_bias()) names.push_back(p + ".bias");
  if (l.batchnorm) {
    names.push_back(p + ".gamma");
    names.push_back(p + ".beta");
    names.push_back(p + ".running_mean");
    names.push_back(p + ".running_var");
  }
  return names;
}

template <typename T>
std::vector<std::string> Network<T>::trainable_params() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < spec_.depth(); ++i)
    for (auto& n : layer_params(i))
      if (n.find(".running_") == std::string::npos) out.push_back(n);
  return out;
}

template <typename T>
Tensor<T> Network<T>::forward(ParameterStore<T>& store, const Tensor<T>& x, const ForwardOptions<T>& opts,
                              std::vector<Tensor<T>>* layer_outputs) const {
  Shape expected{x.rank() > 0 ? x.dim(0) : 0};
  expected.insert(expected.end(), spec_.input_shape.begin(), spec_.input_shape.end());
  if (x.rank() == 0 || shape_size(x.shape()) != shape_size(expected))
    throw ShapeError("network '" + name_ + "': input " + shape_str(x.shape()) + " does not match " +
                     shape_str(expected));
  const std::size_t n = x.dim(0);
  Tensor<T> h = x.shape() == expected ? x : reshape(x, expected);

  for (std::size_t i = 0; i < spec_.depth(); ++i) {
    const LayerDesc& l = spec_.layers[i];
    const std::string& p = layer_names_[i];
    const Tensor<T> w = store.use(p + ".weight", opts.tape);
    switch (l.kind) {
      case LayerKind::dense:
        if (h.rank() != 2) h = reshape(h, {n, h.size() / n});
        h = matmul(h, w);
        break;
      case LayerKind::conv:
        h = conv2d(h, w, Conv2dOptions{l.stride, l.padding, 0});
        break;
      case LayerKind::conv_transpose:
        h = conv2d_transpose(h, w, Conv2dOptions{l.stride, l.padding, l.output_padding});
        break;
    }
    if (l.has_bias()) h = add_bias(h, store.use(p + ".bias", opts.tape));
    if (!l.reshape.empty()) {
      Shape s{n};
      s.insert(s.end(), l.reshape.begin(), l.reshape.end());
      h = reshape(h, s);
    }
    if (l.batchnorm) {
      BatchNormOptions<T> bn;
      bn.mode = opts.bn_mode;
      bn.update_running = opts.update_running;
      if (opts.bn_mode == BatchNormMode::eval || opts.update_running) {
        bn.running_mean = store.mutable_value(p + ".running_mean");
        bn.running_var = store.mutable_value(p + ".running_var");
      }
      h = batchnorm(h, store.use(p + ".gamma", opts.tape), store.use(p + ".beta", opts.tape), bn);
    }
    if (l.pool != 0) h = maxpool2d(h, l.pool, l.pool);
    switch (l.activation) {
      case Activation::none: break;
      case Activation::relu: h = relu(h); break;
      case Activation::leaky_relu: h = leaky_relu(h, static_cast<T>(l.slope)); break;
      case Activation::tanh: h = xgan::tanh(h); break;
      case Activation::sigmoid: h = sigmoid(h); break;
    }
    if (layer_outputs != nullptr) layer_outputs->push_back(h);
  }
  return h;
}

template <typename T>
void add_layer_slots(ParameterStore<T>& store, const LayerDesc& layer, const std::string& prefix, const Rng& init) {
  store.add_slot(prefix + ".weight", Tensor<T>::zeros(layer.weight_shape()));
  init_param(store, prefix + ".weight", InitScheme::normal_002, init);
  if (layer.has_bias()) store.add_slot(prefix + ".bias", Tensor<T>::zeros({layer.out}));
  if (layer.batchnorm) {
    const std::size_t c = layer.norm_channels();
    store.add_slot(prefix + ".gamma", Tensor<T>::full({c}, T(1)));
    store.add_slot(prefix + ".beta", Tensor<T>::zeros({c}));
    store.add_slot(prefix + ".running_mean", Tensor<T>::zeros({c}), false);
    store.add_slot(prefix + ".running_var", Tensor<T>::full({c}, T(1)), false);
  }
}

namespace {

const char* const kParamSuffixes[] = {".weight", ".bias", ".gamma", ".beta", ".running_mean", ".running_var"};

template <typename T>
void alias_layer(ParameterStore<T>& store, const std::string& name, const std::string& slot_prefix) {
  for (const char* suffix : kParamSuffixes)
    if (store.contains(slot_prefix + suffix)) store.alias(name + suffix, slot_prefix + suffix);
}

template <typename T>
std::pair<Network<T>, Network<T>> build_pair(const NetSpec& spec, std::size_t tied_from, std::size_t tied_to,
                                             ParameterStore<T>& store, const Rng& init, const std::string& shared,
                                             const std::string& n1, const std::string& n2) {
  std::vector<std::string> names1, names2;
  for (std::size_t i = 0; i < spec.depth(); ++i) {
    const std::string suffix = ".l" + std::to_string(i);
    names1.push_back(n1 + suffix);
    names2.push_back(n2 + suffix);
    if (i >= tied_from && i < tied_to) {
      add_layer_slots(store, spec.layers[i], shared + suffix, init);
      alias_layer(store, n1 + suffix, shared + suffix);
      alias_layer(store, n2 + suffix, shared + suffix);
    } else {
      add_layer_slots(store, spec.layers[i], n1 + suffix, init);
      add_layer_slots(store, spec.layers[i], n2 + suffix, init);
    }
  }
  return {Network<T>(n1, spec, std::move(names1)), Network<T>(n2, spec, std::move(names2))};
}

}  // namespace

template <typename T>
Network<T> build_network(const NetSpec& spec, const std::string& name, ParameterStore<T>& store, const Rng& init) {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < spec.depth(); ++i) {
    names.push_back(name + ".l" + std::to_string(i));
    add_layer_slots(store, spec.layers[i], names.back(), init);
  }
  return Network<T>(name, spec, std::move(names));
}

template <typename T>
std::pair<Network<T>, Network<T>> build_generator_pair(const NetSpec& spec, const SharingConfig& sharing,
                                                       ParameterStore<T>& store, const Rng& init,
                                                       const std::string& shared) {
  if (sharing.k > spec.depth())
    throw ConfigError("generator sharing k=" + std::to_string(sharing.k) + " exceeds depth " +
                      std::to_string(spec.depth()));
  return build_pair(spec, 0, sharing.k, store, init, shared, shared + "1", shared + "2");
}

template <typename T>
std::pair<Network<T>, Network<T>> build_discriminator_pair(const NetSpec& spec, const SharingConfig& sharing,
                                                           ParameterStore<T>& store, const Rng& init,
                                                           const std::string& shared) {
  if (sharing.l > spec.depth())
    throw ConfigError("discriminator sharing l=" + std::to_string(sharing.l) + " exceeds depth " +
                      std::to_string(spec.depth()));
  return build_pair(spec, spec.depth() - sharing.l, spec.depth(), store, init, shared, shared + "1", shared + "2");
}

#define XGAN_INSTANTIATE_NETWORK(T)                                                                             \
  template class Network<T>;                                                                                    \
  template void add_layer_slots(ParameterStore<T>&, const LayerDesc&, const std::string&, const Rng&);          \
  template Network<T> build_network(const NetSpec&, const std::string&, ParameterStore<T>&, const Rng&);        \
  template std::pair<Network<T>, Network<T>> build_generator_pair(const NetSpec&, const SharingConfig&,         \
                                                                  ParameterStore<T>&, const Rng&,               \
                                                                  const std::string&);                          \
  template std::pair<Network<T>, Network<T>> build_discriminator_pair(const NetSpec&, const SharingConfig&,     \
                                                                      ParameterStore<T>&, const Rng&,           \
                                                                      const std::string&);

XGAN_INSTANTIATE_NETWORK(float)
XGAN_INSTANTIATE_NETWORK(double)

}  // namespace xgan
