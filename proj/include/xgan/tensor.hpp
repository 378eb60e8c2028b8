#pragma once
// Dense row-major tensors and the reverse-mode tape that differentiates them.
//
// A Tensor is an immutable value: copies share the underlying buffer and
// mutable_data() detaches (copy-on-write). A tensor is "tracked" when it was
// produced on a Tape; ops on tracked inputs record a node whose backward
// closure accumulates adjoints into the inputs' nodes.

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace xgan {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

template <typename T>
class Tape;

template <typename T>
class Tensor {
 public:
  using value_type = T;

  /// Rank-0 zero.
  Tensor();
  Tensor(Shape shape, std::vector<T> data);

  /// Skips the finiteness scan; callers check with their own diagnostics.
  static Tensor unchecked(Shape shape, std::vector<T> data);
  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, T value);
  static Tensor scalar(T value) { return full({}, value); }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_.at(i); }
  std::size_t size() const { return data_->size(); }

  std::span<const T> data() const { return *data_; }
  const T* ptr() const { return data_->data(); }
  T at(std::size_t i) const { return data_->at(i); }
  /// Value of a single-element tensor.
  T item() const;

  /// Writable view of the buffer, cloning it first if shared. Only valid on
  /// untracked tensors; tape-recorded values are frozen.
  std::span<T> mutable_data();

  bool tracked() const { return tape_ != nullptr; }
  Tape<T>* tape() const { return tape_; }
  int node() const { return node_; }

  /// Same values, no tape association.
  Tensor detach() const;

 private:
  friend class Tape<T>;

  Shape shape_;
  std::shared_ptr<std::vector<T>> data_;
  Tape<T>* tape_ = nullptr;
  int node_ = -1;
};

template <typename T>
using GradMap = std::map<std::string, Tensor<T>>;

/// Records ops in execution order and replays them backwards.
///
/// Leaves are keyed by name: asking twice for the same key returns the same
/// node, so a parameter used by several layers (weight tying) accumulates
/// one summed adjoint.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(std::span<const T> grad_out, Tape& tape)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Tensor<T> leaf(const std::string& key, const Tensor<T>& value);
  bool has_leaf(const std::string& key) const { return leaves_.count(key) != 0; }

  /// Puts `value` on the tape with the given adjoint rule.
  Tensor<T> record(const Tensor<T>& value, BackwardFn backward);

  /// True if `t` lives on this tape and therefore wants an adjoint.
  bool wants_grad(const Tensor<T>& t) const { return t.tape() == this; }

  /// Adjoint accumulator of a tracked tensor, zero-initialised on first use.
  std::span<T> grad_buffer(const Tensor<T>& t);
  void accumulate(const Tensor<T>& t, std::span<const T> g);

  /// Gradients of a scalar root with respect to every leaf. Leaves the root
  /// does not depend on map to zeros. Each node is visited once, in reverse
  /// recording order.
  GradMap<T> backward(const Tensor<T>& root);

  std::size_t size() const { return nodes_.size(); }
  std::size_t leaf_count() const { return leaves_.size(); }
  /// Nodes whose backward rule ran during the last backward().
  std::size_t last_visit_count() const { return last_visits_; }

 private:
  struct Node {
    Shape shape;
    BackwardFn backward;
    std::string leaf_key;
    std::vector<T> grad;
  };

  std::vector<Node> nodes_;
  std::map<std::string, int> leaves_;
  std::size_t last_visits_ = 0;
};

extern template class Tensor<float>;
extern template class Tensor<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace xgan
