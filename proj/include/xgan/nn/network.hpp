#pragma once
// Feed-forward networks evaluated against a ParameterStore, and the twin
// network builders that tie layers through store aliases.

#include <string>
#include <utility>
#include <vector>

#include "xgan/nn/netspec.hpp"
#include "xgan/nn/param_store.hpp"
#include "xgan/ops.hpp"
#include "xgan/rng.hpp"

namespace xgan {

template <typename T>
struct ForwardOptions {
  /// Tape that parameters are recorded on. Null evaluates the parameters as
  /// constants; inputs that are already tracked still propagate.
  Tape<T>* tape = nullptr;
  BatchNormMode bn_mode = BatchNormMode::train;
  /// Blend batch statistics into the running statistics (train mode only).
  bool update_running = true;
};

template <typename T>
class Network {
 public:
  Network() = default;
  /// `layer_names[i]` prefixes the parameter names of layer i, e.g.
  /// "g1.l0" -> "g1.l0.weight".
  Network(std::string name, NetSpec spec, std::vector<std::string> layer_names);

  const std::string& name() const { return name_; }
  const NetSpec& spec() const { return spec_; }
  const std::string& layer_name(std::size_t i) const { return layer_names_.at(i); }

  /// Parameter names of layer i (trainable ones first, then buffers).
  std::vector<std::string> layer_params(std::size_t i) const;
  std::vector<std::string> trainable_params() const;

  /// x: [N, input_shape...]. If `layer_outputs` is given it receives the
  /// output of every layer in order.
  Tensor<T> forward(ParameterStore<T>& store, const Tensor<T>& x, const ForwardOptions<T>& opts,
                    std::vector<Tensor<T>>* layer_outputs = nullptr) const;

 private:
  std::string name_;
  NetSpec spec_;
  std::vector<std::string> layer_names_;
};

/// Creates and initialises the slots of one layer under `prefix`.
template <typename T>
void add_layer_slots(ParameterStore<T>& store, const LayerDesc& layer, const std::string& prefix, const Rng& init);

/// A single network whose layers own their slots.
template <typename T>
Network<T> build_network(const NetSpec& spec, const std::string& name, ParameterStore<T>& store, const Rng& init);

/// g1, g2 with the first k layers tied (slots under "<shared>.l<i>").
template <typename T>
std::pair<Network<T>, Network<T>> build_generator_pair(const NetSpec& spec, const SharingConfig& sharing,
                                                       ParameterStore<T>& store, const Rng& init,
                                                       const std::string& shared = "g");

/// f1, f2 with the last l layers tied.
template <typename T>
std::pair<Network<T>, Network<T>> build_discriminator_pair(const NetSpec& spec, const SharingConfig& sharing,
                                                           ParameterStore<T>& store, const Rng& init,
                                                           const std::string& shared = "f");

extern template class Network<float>;
extern template class Network<double>;

}  // namespace xgan
