#pragma once
// Every network of the two-view model in one parameter store.

#include <cstdint>

#include "xgan/alignment.hpp"
#include "xgan/crossgan/config.hpp"
#include "xgan/vae.hpp"

namespace xgan {

struct CrossGanModel {
  ModelConfig config;
  ParameterStore<float> store;
  VaeNets<float> vae_a;
  VaeNets<float> vae_b;
  AlignMap<float> align;
  Network<float> g1, g2;
  Network<float> f1, f2;
};

/// Slots are initialised from Rng(seed, "init") split by slot id.
CrossGanModel build_model(const ModelConfig& config, std::uint64_t seed);

}  // namespace xgan
