#include "xgan/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "xgan/errors.hpp"
#include "xgan/kernels/kernels.hpp"

namespace xgan {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << ']';
  return os.str();
}

template <typename T>
Tensor<T>::Tensor() : data_(std::make_shared<std::vector<T>>(1, T(0))) {}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> data)
    : shape_(std::move(shape)), data_(std::make_shared<std::vector<T>>(std::move(data))) {
  if (shape_size(shape_) != data_->size())
    throw ShapeError("tensor: shape " + shape_str(shape_) + " needs " +
                     std::to_string(shape_size(shape_)) + " elements, got " +
                     std::to_string(data_->size()));
  if (!kernels::active<T>().all_finite(data_->size(), data_->data()))
    throw NumericError("tensor: non-finite value in constructor data");
}

template <typename T>
Tensor<T> Tensor<T>::unchecked(Shape shape, std::vector<T> data) {
  if (shape_size(shape) != data.size())
    throw ShapeError("tensor: shape " + shape_str(shape) + " needs " +
                     std::to_string(shape_size(shape)) + " elements, got " +
                     std::to_string(data.size()));
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = std::make_shared<std::vector<T>>(std::move(data));
  return out;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape) {
  const auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<T>(n, T(0)));
}

template <typename T>
Tensor<T> Tensor<T>::full(Shape shape, T value) {
  const auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<T>(n, value));
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1)
    throw ShapeError("item: tensor of shape " + shape_str(shape_) + " is not a scalar");
  return (*data_)[0];
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (tracked()) throw ContractError("mutable_data: tensor is recorded on a tape");
  if (data_.use_count() > 1) data_ = std::make_shared<std::vector<T>>(*data_);
  return *data_;
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  Tensor out = *this;
  out.tape_ = nullptr;
  out.node_ = -1;
  return out;
}

template <typename T>
Tensor<T> Tape<T>::leaf(const std::string& key, const Tensor<T>& value) {
  if (auto it = leaves_.find(key); it != leaves_.end()) {
    const Node& n = nodes_[static_cast<std::size_t>(it->second)];
    if (n.shape != value.shape())
      throw ShapeError("tape leaf '" + key + "': shape " + shape_str(value.shape()) +
                       " conflicts with recorded " + shape_str(n.shape));
    Tensor<T> out = value.detach();
    out.tape_ = this;
    out.node_ = it->second;
    return out;
  }
  Tensor<T> out = value.detach();
  out.tape_ = this;
  out.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{value.shape(), nullptr, key, {}});
  leaves_.emplace(key, out.node_);
  return out;
}

template <typename T>
Tensor<T> Tape<T>::record(const Tensor<T>& value, BackwardFn backward) {
  Tensor<T> out = value.detach();
  out.tape_ = this;
  out.node_ = static_cast<int>(nodes_.size());
  nodes_.push_back(Node{value.shape(), std::move(backward), {}, {}});
  return out;
}

template <typename T>
std::span<T> Tape<T>::grad_buffer(const Tensor<T>& t) {
  if (t.tape() != this) throw ContractError("grad_buffer: tensor is not on this tape");
  Node& n = nodes_[static_cast<std::size_t>(t.node())];
  if (n.grad.empty()) n.grad.assign(shape_size(n.shape), T(0));
  return n.grad;
}

template <typename T>
void Tape<T>::accumulate(const Tensor<T>& t, std::span<const T> g) {
  if (t.tape() != this) return;
  auto buf = grad_buffer(t);
  kernels::active<T>().axpy(buf.size(), T(1), g.data(), buf.data());
}

template <typename T>
GradMap<T> Tape<T>::backward(const Tensor<T>& root) {
  if (root.size() != 1)
    throw ContractError("backward: root must be a scalar, got shape " + shape_str(root.shape()));
  if (root.tracked() && root.tape() != this)
    throw ContractError("backward: root was recorded on a different tape");

  for (auto& n : nodes_) n.grad.clear();
  last_visits_ = 0;

  if (root.tracked()) {
    auto seed = grad_buffer(root);
    seed[0] = T(1);
    for (int i = root.node(); i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (!n.backward || n.grad.empty()) continue;
      // The closure may touch other nodes' buffers; keep ours alive.
      const std::vector<T> g = std::move(n.grad);
      n.grad.clear();
      n.backward(g, *this);
      ++last_visits_;
    }
  }

  GradMap<T> out;
  for (const auto& [key, idx] : leaves_) {
    Node& n = nodes_[static_cast<std::size_t>(idx)];
    if (n.grad.empty())
      out.emplace(key, Tensor<T>::zeros(n.shape));
    else
      out.emplace(key, Tensor<T>(n.shape, n.grad));
  }
  return out;
}

template class Tensor<float>;
template class Tensor<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace xgan
