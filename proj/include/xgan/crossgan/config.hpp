#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "xgan/nn/netspec.hpp"

namespace xgan {

enum class DataKind { image, vector };

struct ModelConfig {
  DataKind kind = DataKind::image;
  // Image data: channels x size x size.
  std::size_t channels = 3;
  std::size_t size = 32;
  // Vector data: one row of `vector_dim` values per sample.
  std::size_t vector_dim = 1;

  std::size_t latent = 100;
  std::vector<std::size_t> vae_hidden{512, 512};
  std::size_t g_width = 20;
  std::size_t d_width = 20;
  std::size_t d_hidden = 1024;
  /// Hidden width of the generator/discriminator MLPs for vector data.
  std::size_t mlp_hidden = 32;
  SharingConfig sharing{4, 1};

  std::size_t data_dim() const;
  /// Per-sample shape: {C, H, W} or {vector_dim}.
  Shape sample_shape() const;
  NetSpec generator() const;
  NetSpec discriminator() const;
  void validate() const;
};

struct TrainConfig {
  double lr = 0.002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch = 32;
  std::size_t iters = 3000;
  double tau = 1.0;
  bool align = true;
  bool feature_matching = false;
  /// Use the literal log(1 - D(G(z))) generator objective.
  bool saturating = false;
  /// Per-slot gradient norm ceiling.
  double clip = 10.0;
  std::uint64_t seed = 7;
  std::size_t checkpoint_every = 500;
  std::size_t sample_every = 500;
  /// 2 trains both views; 1 trains view A's VAE, g1 and f1 only.
  int streams = 2;

  void validate() const;
};

/// "desk" (32 x 32 images, batch 32, 3000 iterations) or "paper" (batch
/// 128, 30000 iterations). Throws ConfigError for other names.
TrainConfig train_preset(std::string_view name);
ModelConfig model_preset(std::string_view name);

/// 1-D two-view task: small MLP generator/discriminator, 4-d codes.
ModelConfig toy_model_config();
/// Settings for the 1-D task: 2000 steps at a lower learning rate, which
/// keeps the generated means from orbiting their targets.
TrainConfig toy_train_config();

void to_json(nlohmann::json& j, const SharingConfig& c);
void from_json(const nlohmann::json& j, SharingConfig& c);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

}  // namespace xgan
