#include "xgan/crossgan/model.hpp"

namespace xgan {

CrossGanModel build_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  CrossGanModel m;
  m.config = config;
  const Rng init(seed, fnv1a64("init"));
  m.vae_a = build_vae(config.data_dim(), config.latent, config.vae_hidden, View::A, "vae_a", m.store, init);
  m.vae_b = build_vae(config.data_dim(), config.latent, config.vae_hidden, View::B, "vae_b", m.store, init);
  m.align = build_align(config.latent, m.store, init);
  std::tie(m.g1, m.g2) = build_generator_pair(config.generator(), config.sharing, m.store, init);
  std::tie(m.f1, m.f2) = build_discriminator_pair(config.discriminator(), config.sharing, m.store, init);
  return m;
}

}  // namespace xgan
