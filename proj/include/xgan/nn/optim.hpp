#pragma once

#include <cstddef>

#include "xgan/nn/param_store.hpp"

namespace xgan {

struct AdamConfig {
  double lr = 0.002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One Adam update with bias correction for step t (t >= 1). `grads` is
/// keyed by slot id or alias; each slot must appear at most once, so a tied
/// slot is updated once with its summed gradient. Slots without an entry
/// are left alone.
template <typename T>
void adam_step(ParameterStore<T>& store, const GradMap<T>& grads, const AdamConfig& cfg, std::size_t t);

/// Rescales each gradient whose L2 norm exceeds max_norm down to max_norm.
/// Returns the largest pre-clip norm.
template <typename T>
double clip_each(GradMap<T>& grads, double max_norm);

}  // namespace xgan
