#pragma once
// Differentiable tensor ops.
//
// Every op validates shapes (ShapeError names the op and the shapes), scans
// its output for NaN/inf (NumericError), and records an adjoint rule when
// any input is tracked. Inputs from different tapes are rejected.
//
// Layout conventions: images are NCHW, dense activations are [batch x
// features], conv kernels are [out_channels x in_channels x kh x kw].

#include <cstddef>
#include <span>
#include <vector>

#include "xgan/rng.hpp"
#include "xgan/tensor.hpp"

namespace xgan {

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> add_scalar(const Tensor<T>& a, T value);

/// x: [N, C, ...], bias: [C]; bias broadcast over batch and trailing dims.
template <typename T> Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

/// [m x k] * [k x n] -> [m x n]
template <typename T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

struct Conv2dOptions {
  std::size_t stride = 1;
  std::size_t padding = 0;
  /// Extra rows/cols on the bottom/right of a transposed conv's output;
  /// must be < stride. Ignored by conv2d.
  std::size_t output_padding = 0;
};

/// x: [N, C, H, W], kernel: [O, C, KH, KW] -> [N, O, H', W'] with
/// H' = (H + 2p - KH) / s + 1. Symmetric zero padding.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, Conv2dOptions opts = {});

/// Adjoint of conv2d with the same kernel: x: [N, O, H, W] -> [N, C, H', W']
/// with H' = (H - 1) s - 2p + KH + output_padding.
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& kernel, Conv2dOptions opts = {});

/// Max over window x window patches. Ties resolve to the lowest flat index.
template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, std::size_t window, std::size_t stride);

enum class BatchNormMode { train, eval };

template <typename T>
struct BatchNormOptions {
  BatchNormMode mode = BatchNormMode::train;
  T momentum = T(0.9);
  T eps = T(1e-5);
  /// Running statistics, one entry per channel. In train mode they are
  /// blended towards the batch statistics when update_running is set; in
  /// eval mode they normalise the input.
  std::span<T> running_mean;
  std::span<T> running_var;
  bool update_running = true;
};

/// Per-channel normalisation of x: [N, C, ...] with affine gamma, beta: [C].
template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    const BatchNormOptions<T>& opts);

template <typename T> Tensor<T> relu(const Tensor<T>& x);
template <typename T> Tensor<T> leaky_relu(const Tensor<T>& x, T slope);
template <typename T> Tensor<T> tanh(const Tensor<T>& x);
template <typename T> Tensor<T> sigmoid(const Tensor<T>& x);
template <typename T> Tensor<T> log(const Tensor<T>& x);
template <typename T> Tensor<T> exp(const Tensor<T>& x);
template <typename T> Tensor<T> square(const Tensor<T>& x);

/// Elementwise max(x, floor). The adjoint flows where x >= floor.
template <typename T> Tensor<T> maximum(const Tensor<T>& x, T floor);
/// Elementwise clamp to [lo, hi]. The adjoint flows where lo <= x <= hi.
template <typename T> Tensor<T> clamp(const Tensor<T>& x, T lo, T hi);

/// Reductions to a rank-0 scalar.
template <typename T> Tensor<T> sum(const Tensor<T>& x);
template <typename T> Tensor<T> mean(const Tensor<T>& x);
/// [N, ...] -> [N]: sum over every axis except the first.
template <typename T> Tensor<T> sum_rows(const Tensor<T>& x);
/// [N, ...] -> [...]: mean over the first axis.
template <typename T> Tensor<T> mean_rows(const Tensor<T>& x);

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
/// Elements [begin, end) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end);
template <typename T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);

/// I.i.d. N(0, 1) draws. Throws ContractError on an empty shape.
template <typename T>
Tensor<T> sample_standard_normal(Rng& rng, const Shape& shape);

}  // namespace xgan
