#pragma once
// Layer descriptors and the stock architectures.
//
// A layer runs: linear op (+ bias when there is no batchnorm), optional
// reshape, optional batchnorm, optional max-pool, activation.

#include <cstddef>
#include <string>
#include <vector>

#include "xgan/tensor.hpp"

namespace xgan {

enum class LayerKind { dense, conv, conv_transpose };
enum class Activation { none, relu, leaky_relu, tanh, sigmoid };

std::string to_string(LayerKind k);
std::string to_string(Activation a);

struct LayerDesc {
  LayerKind kind = LayerKind::dense;
  /// Input features (dense) or channels (conv).
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  std::size_t output_padding = 0;
  /// Per-sample shape the linear output is viewed as; empty keeps it.
  Shape reshape;
  bool batchnorm = false;
  /// Max-pool window, also used as its stride. 0 disables pooling.
  std::size_t pool = 0;
  Activation activation = Activation::none;
  double slope = 0.2;

  bool has_bias() const { return !batchnorm; }
  /// Channels seen by batchnorm: the first reshape extent if any.
  std::size_t norm_channels() const { return reshape.empty() ? out : reshape.front(); }
  Shape weight_shape() const;
};

struct NetSpec {
  std::vector<LayerDesc> layers;
  /// Default tying pattern: true where the layer is shared with the twin
  /// network.
  std::vector<bool> share_mask;
  /// Per-sample input shape.
  Shape input_shape;

  std::size_t depth() const { return layers.size(); }
  /// Per-sample output shape; throws ShapeError if the layers do not chain.
  Shape output_shape() const;
  /// Number of leading (or trailing) true entries of share_mask.
  std::size_t leading_shared() const;
  std::size_t trailing_shared() const;
};

/// Number of leading generator layers (k) and trailing discriminator
/// layers (l) tied between the twin networks.
struct SharingConfig {
  std::size_t k = 4;
  std::size_t l = 1;
};

/// Image generator: FC projection to a (size/8)^2 x width map, three
/// stride-2 transposed convs, then a 3x3 conv to `channels` with tanh.
/// Default tying: first four layers.
NetSpec generator_spec(std::size_t latent, std::size_t channels, std::size_t size, std::size_t width = 20);

/// Image discriminator: three 5x5 conv + 2x2 max-pool + leaky ReLU blocks,
/// FC to `hidden` with ReLU, FC to one sigmoid unit. Default tying: last layer.
NetSpec discriminator_spec(std::size_t channels, std::size_t size, std::size_t width = 20,
                           std::size_t hidden = 1024);

/// Fully connected stack with `hidden_act` between layers and `out_act` on
/// the last one. No tying by default.
NetSpec mlp_spec(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out,
                 Activation hidden_act = Activation::relu, Activation out_act = Activation::none);

}  // namespace xgan
