#pragma once
// Named parameter slots with aliasing.
//
// A slot owns a value and its Adam moments. Layers refer to parameters by
// name; a name is either a slot id or an alias of one. Two layers whose
// names alias the same slot are tied: they read the same value and the tape
// sums their adjoints into a single leaf keyed by the slot id.

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "xgan/rng.hpp"
#include "xgan/tensor.hpp"

namespace xgan {

template <typename T>
struct ParamSlot {
  Tensor<T> value;
  Tensor<T> grad;    // last gradient applied by the optimizer
  Tensor<T> adam_m;
  Tensor<T> adam_v;
  /// Running statistics and other buffers are stored but not optimized.
  bool trainable = true;
};

enum class InitScheme { normal_002, zeros, ones };

template <typename T>
class ParameterStore {
 public:
  void add_slot(const std::string& id, Tensor<T> value, bool trainable = true);
  void alias(const std::string& name, const std::string& slot_id);

  bool contains(const std::string& name) const;
  /// Slot id behind a name; throws ContractError for unknown names.
  const std::string& resolve(const std::string& name) const;

  ParamSlot<T>& slot(const std::string& name);
  const ParamSlot<T>& slot(const std::string& name) const;
  const Tensor<T>& value(const std::string& name) const { return slot(name).value; }
  std::span<T> mutable_value(const std::string& name) { return slot(name).value.mutable_data(); }

  /// The parameter as a tape leaf keyed by its slot id, or the plain value
  /// when tape is null.
  Tensor<T> use(const std::string& name, Tape<T>* tape) const;

  std::vector<std::string> slot_ids() const;
  const std::map<std::string, ParamSlot<T>>& slots() const { return slots_; }
  const std::map<std::string, std::string>& aliases() const { return aliases_; }

  /// Number of trainable scalars, counting each tied slot once.
  std::size_t trainable_count() const;

 private:
  std::map<std::string, ParamSlot<T>> slots_;
  std::map<std::string, std::string> aliases_;
};

/// Fills a slot in place. The draw is taken from base.split(slot id), so it
/// does not depend on the order in which slots are initialised.
template <typename T>
void init_param(ParameterStore<T>& store, const std::string& slot_id, InitScheme scheme, const Rng& base);

extern template class ParameterStore<float>;
extern template class ParameterStore<double>;

}  // namespace xgan
