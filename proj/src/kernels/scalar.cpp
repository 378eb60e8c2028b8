#include "xgan/kernels/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace xgan::kernels::scalar {
namespace {

template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const T* a, std::size_t lda, const T* b,
          std::size_t ldb, T* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    if (!accumulate) std::fill(crow, crow + n, T(0));
    for (std::size_t p = 0; p < k; ++p) {
      const T av = trans_a ? a[p * lda + i] : a[i * lda + p];
      if (!trans_b) {
        const T* brow = b + p * ldb;
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      } else {
        for (std::size_t j = 0; j < n; ++j) crow[j] += av * b[j * ldb + p];
      }
    }
  }
}

template <typename T>
void add(std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

template <typename T>
void sub(std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

template <typename T>
void mul(std::size_t n, const T* a, const T* b, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

template <typename T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale(std::size_t n, T alpha, const T* x, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * x[i];
}

template <typename T>
void mul_acc(std::size_t n, const T* a, const T* b, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

template <typename T>
void relu(std::size_t n, const T* x, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(std::size_t n, const T* x, const T* gout, T* gin) {
  for (std::size_t i = 0; i < n; ++i)
    if (x[i] > T(0)) gin[i] += gout[i];
}

template <typename T>
void leaky_relu(std::size_t n, T slope, const T* x, T* out) {
  for (std::size_t i = 0; i < n; ++i) out[i] = x[i] > T(0) ? x[i] : slope * x[i];
}

template <typename T>
void leaky_relu_backward(std::size_t n, T slope, const T* x, const T* gout,
                         T* gin) {
  for (std::size_t i = 0; i < n; ++i)
    gin[i] += x[i] > T(0) ? gout[i] : slope * gout[i];
}

template <typename T>
T sum(std::size_t n, const T* x) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

template <typename T>
T dot(std::size_t n, const T* a, const T* b) {
  T s = 0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

template <typename T>
bool all_finite(std::size_t n, const T* x) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

template <typename T>
void adam(std::size_t n, T* theta, const T* grad, T* m, T* v,
          const AdamCoeffs<T>& c) {
  const T omb1 = T(1) - c.beta1;
  const T omb2 = T(1) - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    const T g = grad[i];
    const T mi = c.beta1 * m[i] + omb1 * g;
    const T vi = c.beta2 * v[i] + omb2 * (g * g);
    m[i] = mi;
    v[i] = vi;
    theta[i] -= c.step_size * mi / (std::sqrt(vi * c.inv_bias2) + c.eps);
  }
}

template <typename T>
KernelTable<T> make_table() {
  return KernelTable<T>{Backend::scalar,
                        &gemm<T>,
                        &add<T>,
                        &sub<T>,
                        &mul<T>,
                        &axpy<T>,
                        &scale<T>,
                        &mul_acc<T>,
                        &relu<T>,
                        &relu_backward<T>,
                        &leaky_relu<T>,
                        &leaky_relu_backward<T>,
                        &sum<T>,
                        &dot<T>,
                        &all_finite<T>,
                        &adam<T>};
}

}  // namespace

template <typename T>
const KernelTable<T>& table() {
  static const KernelTable<T> t = make_table<T>();
  return t;
}

template const KernelTable<float>& table<float>();
template const KernelTable<double>& table<double>();

}  // namespace xgan::kernels::scalar
