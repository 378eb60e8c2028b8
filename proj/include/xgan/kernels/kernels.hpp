#pragma once
// Flat-buffer arithmetic kernels.
//
// Every kernel has a portable scalar reference implementation. Wider
// variants (AVX2 + FMA on x86-64) are compiled into their own translation
// unit and picked at runtime from a function table. Elementwise kernels are
// bit-identical across backends; reductions and GEMM differ only by
// summation order.

#include <cstddef>
#include <string_view>

namespace xgan::kernels {

enum class Backend { scalar, avx2 };

std::string_view backend_name(Backend b);

/// Coefficients for one fused Adam update, with the bias corrections
/// already folded in by the caller.
template <typename T>
struct AdamCoeffs {
  T beta1;
  T beta2;
  T step_size;  // lr / (1 - beta1^t)
  T inv_bias2;  // 1 / (1 - beta2^t)
  T eps;
};

template <typename T>
struct KernelTable {
  Backend backend;

  // C[m x n] (+)= op(A) op(B), row-major with leading dimensions. op(A) is
  // m x k; with trans_a, A is stored k x m (likewise B, stored n x k).
  void (*gemm)(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
               std::size_t k, const T* a, std::size_t lda, const T* b,
               std::size_t ldb, T* c, std::size_t ldc, bool accumulate);

  void (*add)(std::size_t n, const T* a, const T* b, T* out);
  void (*sub)(std::size_t n, const T* a, const T* b, T* out);
  void (*mul)(std::size_t n, const T* a, const T* b, T* out);
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
  void (*scale)(std::size_t n, T alpha, const T* x, T* out);
  // y += a * b
  void (*mul_acc)(std::size_t n, const T* a, const T* b, T* y);

  void (*relu)(std::size_t n, const T* x, T* out);
  // gin += gout where x > 0
  void (*relu_backward)(std::size_t n, const T* x, const T* gout, T* gin);
  void (*leaky_relu)(std::size_t n, T slope, const T* x, T* out);
  void (*leaky_relu_backward)(std::size_t n, T slope, const T* x,
                              const T* gout, T* gin);

  T (*sum)(std::size_t n, const T* x);
  T (*dot)(std::size_t n, const T* a, const T* b);
  bool (*all_finite)(std::size_t n, const T* x);

  void (*adam)(std::size_t n, T* theta, const T* grad, T* m, T* v,
               const AdamCoeffs<T>& c);
};

/// Table for an explicit backend, or nullptr when the backend was not
/// compiled in or the CPU lacks the instructions.
template <typename T>
const KernelTable<T>* kernels_for(Backend b);

/// The table used by the tensor ops. Chosen once per process: the widest
/// supported backend, unless XGAN_SIMD=scalar is set in the environment.
template <typename T>
const KernelTable<T>& active();

bool cpu_supports(Backend b);

namespace scalar {
template <typename T>
const KernelTable<T>& table();
}

#if defined(XGAN_HAVE_AVX2)
namespace avx2 {
const KernelTable<float>& table();
}
#endif

}  // namespace xgan::kernels
