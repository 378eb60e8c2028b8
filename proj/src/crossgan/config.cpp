#include "xgan/crossgan/config.hpp"

#include "xgan/errors.hpp"

namespace xgan {

std::size_t ModelConfig::data_dim() const { return shape_size(sample_shape()); }

Shape ModelConfig::sample_shape() const {
  if (kind == DataKind::image) return {channels, size, size};
  return {vector_dim};
}

NetSpec ModelConfig::generator() const {
  if (kind == DataKind::image) return generator_spec(latent, channels, size, g_width);
  NetSpec s = mlp_spec(latent, {mlp_hidden, mlp_hidden}, vector_dim, Activation::relu, Activation::none);
  s.share_mask = {true, false, false};
  return s;
}

NetSpec ModelConfig::discriminator() const {
  if (kind == DataKind::image) return discriminator_spec(channels, size, d_width, d_hidden);
  NetSpec s = mlp_spec(vector_dim, {mlp_hidden, mlp_hidden}, 1, Activation::leaky_relu, Activation::sigmoid);
  s.share_mask = {false, false, true};
  return s;
}

void ModelConfig::validate() const {
  if (latent == 0) throw ConfigError("latent dimension must be positive");
  if (kind == DataKind::image && (channels == 0 || size == 0)) throw ConfigError("image shape must be positive");
  if (kind == DataKind::vector && vector_dim == 0) throw ConfigError("vector_dim must be positive");
  const std::size_t m = generator().depth(), n = discriminator().depth();
  if (sharing.k > m) throw ConfigError("k=" + std::to_string(sharing.k) + " exceeds generator depth " + std::to_string(m));
  if (sharing.l > n)
    throw ConfigError("l=" + std::to_string(sharing.l) + " exceeds discriminator depth " + std::to_string(n));
}

void TrainConfig::validate() const {
  if (!(lr > 0) || !(beta1 > 0 && beta1 < 1) || !(beta2 > 0 && beta2 < 1) || !(adam_eps > 0))
    throw ConfigError("optimizer settings must be positive with betas in (0, 1)");
  if (batch == 0 || batch % 2 != 0) throw ConfigError("batch must be positive and even, got " + std::to_string(batch));
  if (!(tau > 0)) throw ConfigError("tau must be positive");
  if (!(clip > 0)) throw ConfigError("clip must be positive");
  if (checkpoint_every == 0 || sample_every == 0) throw ConfigError("checkpoint and sample intervals must be positive");
  if (streams != 1 && streams != 2) throw ConfigError("streams must be 1 or 2");
  if (streams == 1 && align) throw ConfigError("alignment needs both streams");
}

TrainConfig train_preset(std::string_view name) {
  TrainConfig c;
  if (name == "desk") return c;
  if (name == "paper") {
    c.batch = 128;
    c.iters = 30000;
    c.checkpoint_every = 2000;
    c.sample_every = 2000;
    return c;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or paper)");
}

ModelConfig model_preset(std::string_view name) {
  if (name != "desk" && name != "paper")
    throw ConfigError("unknown preset '" + std::string(name) + "' (expected desk or paper)");
  return ModelConfig{};
}

ModelConfig toy_model_config() {
  ModelConfig c;
  c.kind = DataKind::vector;
  c.vector_dim = 1;
  c.latent = 4;
  c.vae_hidden = {32, 32};
  c.mlp_hidden = 32;
  c.sharing = {1, 1};
  return c;
}

TrainConfig toy_train_config() {
  TrainConfig t;
  t.lr = 0.0005;
  t.iters = 2000;
  t.checkpoint_every = 1000;
  t.sample_every = 1000;
  return t;
}

void to_json(nlohmann::json& j, const SharingConfig& c) { j = {{"k", c.k}, {"l", c.l}}; }

void from_json(const nlohmann::json& j, SharingConfig& c) {
  j.at("k").get_to(c.k);
  j.at("l").get_to(c.l);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = {{"kind", c.kind == DataKind::image ? "image" : "vector"},
       {"channels", c.channels},
       {"size", c.size},
       {"vector_dim", c.vector_dim},
       {"latent", c.latent},
       {"vae_hidden", c.vae_hidden},
       {"g_width", c.g_width},
       {"d_width", c.d_width},
       {"d_hidden", c.d_hidden},
       {"mlp_hidden", c.mlp_hidden},
       {"sharing", c.sharing}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind != "image" && kind != "vector") throw ConfigError("unknown model kind '" + kind + "'");
  c.kind = kind == "image" ? DataKind::image : DataKind::vector;
  j.at("channels").get_to(c.channels);
  j.at("size").get_to(c.size);
  j.at("vector_dim").get_to(c.vector_dim);
  j.at("latent").get_to(c.latent);
  j.at("vae_hidden").get_to(c.vae_hidden);
  j.at("g_width").get_to(c.g_width);
  j.at("d_width").get_to(c.d_width);
  j.at("d_hidden").get_to(c.d_hidden);
  j.at("mlp_hidden").get_to(c.mlp_hidden);
  j.at("sharing").get_to(c.sharing);
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"lr", c.lr},
       {"beta1", c.beta1},
       {"beta2", c.beta2},
       {"adam_eps", c.adam_eps},
       {"batch", c.batch},
       {"iters", c.iters},
       {"tau", c.tau},
       {"align", c.align},
       {"feature_matching", c.feature_matching},
       {"saturating", c.saturating},
       {"clip", c.clip},
       {"seed", c.seed},
       {"checkpoint_every", c.checkpoint_every},
       {"sample_every", c.sample_every},
       {"streams", c.streams}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  j.at("lr").get_to(c.lr);
  j.at("beta1").get_to(c.beta1);
  j.at("beta2").get_to(c.beta2);
  j.at("adam_eps").get_to(c.adam_eps);
  j.at("batch").get_to(c.batch);
  j.at("iters").get_to(c.iters);
  j.at("tau").get_to(c.tau);
  j.at("align").get_to(c.align);
  j.at("feature_matching").get_to(c.feature_matching);
  j.at("saturating").get_to(c.saturating);
  j.at("clip").get_to(c.clip);
  j.at("seed").get_to(c.seed);
  j.at("checkpoint_every").get_to(c.checkpoint_every);
  j.at("sample_every").get_to(c.sample_every);
  j.at("streams").get_to(c.streams);
}

}  // namespace xgan
