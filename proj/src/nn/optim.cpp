#include "xgan/nn/optim.hpp"

#include <cmath>
#include <set>

#include "xgan/errors.hpp"
#include "xgan/kernels/kernels.hpp"

namespace xgan {

template <typename T>
void adam_step(ParameterStore<T>& store, const GradMap<T>& grads, const AdamConfig& cfg, std::size_t t) {
  if (t < 1) throw ContractError("adam_step: step counter must start at 1");
  const double bias1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double bias2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  const kernels::AdamCoeffs<T> coeffs{static_cast<T>(cfg.beta1), static_cast<T>(cfg.beta2),
                                      static_cast<T>(cfg.lr / bias1), static_cast<T>(1.0 / bias2),
                                      static_cast<T>(cfg.eps)};
  std::set<std::string> seen;
  for (const auto& [name, g] : grads) {
    const std::string& id = store.resolve(name);
    if (!seen.insert(id).second) throw ContractError("adam_step: slot '" + id + "' has more than one gradient");
    ParamSlot<T>& s = store.slot(id);
    if (!s.trainable) throw ContractError("adam_step: slot '" + id + "' is not trainable");
    if (g.shape() != s.value.shape())
      throw ShapeError("adam_step: gradient " + shape_str(g.shape()) + " for slot '" + id + "' of shape " +
                       shape_str(s.value.shape()));
    s.grad = g.detach();
    kernels::active<T>().adam(g.size(), s.value.mutable_data().data(), g.ptr(), s.adam_m.mutable_data().data(),
                              s.adam_v.mutable_data().data(), coeffs);
  }
}

template <typename T>
double clip_each(GradMap<T>& grads, double max_norm) {
  double worst = 0.0;
  for (auto& [name, g] : grads) {
    const double norm = std::sqrt(static_cast<double>(kernels::active<T>().dot(g.size(), g.ptr(), g.ptr())));
    worst = std::max(worst, norm);
    if (norm > max_norm) {
      const T f = static_cast<T>(max_norm / norm);
      auto d = g.mutable_data();
      for (auto& v : d) v *= f;
    }
  }
  return worst;
}

template void adam_step(ParameterStore<float>&, const GradMap<float>&, const AdamConfig&, std::size_t);
template void adam_step(ParameterStore<double>&, const GradMap<double>&, const AdamConfig&, std::size_t);
template double clip_each(GradMap<float>&, double);
template double clip_each(GradMap<double>&, double);

}  // namespace xgan
