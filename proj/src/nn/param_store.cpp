#include "xgan/nn/param_store.hpp"

#include "xgan/errors.hpp"

namespace xgan {

template <typename T>
void ParameterStore<T>::add_slot(const std::string& id, Tensor<T> value, bool trainable) {
  if (slots_.count(id) != 0 || aliases_.count(id) != 0)
    throw ContractError("parameter store: duplicate name '" + id + "'");
  ParamSlot<T> s;
  s.adam_m = Tensor<T>::zeros(value.shape());
  s.adam_v = Tensor<T>::zeros(value.shape());
  s.grad = Tensor<T>::zeros(value.shape());
  s.value = value.detach();
  s.trainable = trainable;
  slots_.emplace(id, std::move(s));
}

template <typename T>
void ParameterStore<T>::alias(const std::string& name, const std::string& slot_id) {
  if (slots_.count(slot_id) == 0)
    throw ContractError("parameter store: alias '" + name + "' targets unknown slot '" + slot_id + "'");
  if (slots_.count(name) != 0) throw ContractError("parameter store: alias '" + name + "' shadows a slot");
  auto [it, inserted] = aliases_.emplace(name, slot_id);
  if (!inserted && it->second != slot_id)
    throw ContractError("parameter store: alias '" + name + "' already bound to '" + it->second + "'");
}

template <typename T>
bool ParameterStore<T>::contains(const std::string& name) const {
  return slots_.count(name) != 0 || aliases_.count(name) != 0;
}

template <typename T>
const std::string& ParameterStore<T>::resolve(const std::string& name) const {
  if (auto it = aliases_.find(name); it != aliases_.end()) return it->second;
  if (auto it = slots_.find(name); it != slots_.end()) return it->first;
  throw ContractError("parameter store: unknown parameter '" + name + "'");
}

template <typename T>
ParamSlot<T>& ParameterStore<T>::slot(const std::string& name) {
  return slots_.find(resolve(name))->second;
}

template <typename T>
const ParamSlot<T>& ParameterStore<T>::slot(const std::string& name) const {
  return slots_.find(resolve(name))->second;
}

template <typename T>
Tensor<T> ParameterStore<T>::use(const std::string& name, Tape<T>* tape) const {
  const std::string& id = resolve(name);
  const ParamSlot<T>& s = slots_.find(id)->second;
  if (tape == nullptr || !s.trainable) return s.value;
  return tape->leaf(id, s.value);
}

template <typename T>
std::vector<std::string> ParameterStore<T>::slot_ids() const {
  std::vector<std::string> ids;
  ids.reserve(slots_.size());
  for (const auto& [id, s] : slots_) ids.push_back(id);
  return ids;
}

template <typename T>
std::size_t ParameterStore<T>::trainable_count() const {
  std::size_t n = 0;
  for (const auto& [id, s] : slots_)
    if (s.trainable) n += s.value.size();
  return n;
}

template <typename T>
void init_param(ParameterStore<T>& store, const std::string& slot_id, InitScheme scheme, const Rng& base) {
  auto data = store.mutable_value(slot_id);
  switch (scheme) {
    case InitScheme::zeros:
      std::fill(data.begin(), data.end(), T(0));
      break;
    case InitScheme::ones:
      std::fill(data.begin(), data.end(), T(1));
      break;
    case InitScheme::normal_002: {
      Rng rng = base.split(store.resolve(slot_id));
      for (auto& v : data) v = static_cast<T>(0.02 * rng.normal());
      break;
    }
  }
}

template class ParameterStore<float>;
template class ParameterStore<double>;
template void init_param(ParameterStore<float>&, const std::string&, InitScheme, const Rng&);
template void init_param(ParameterStore<double>&, const std::string&, InitScheme, const Rng&);

}  // namespace xgan
