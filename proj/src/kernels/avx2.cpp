// AVX2 + FMA variants of the float kernels. This translation unit is the
// only one built with -mavx2 -mfma; callers reach it through the dispatch
// table after a CPUID check.

#include "xgan/kernels/kernels.hpp"

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace xgan::kernels::avx2 {
namespace {

constexpr std::size_t kMr = 6;    // micro-tile rows
constexpr std::size_t kNr = 16;   // micro-tile columns (two ymm)
constexpr std::size_t kKc = 256;  // depth block
constexpr std::size_t kMc = 72;   // rows of A packed at once
constexpr std::size_t kNc = 1024; // columns of B packed at once

// Packs op(A)[i0:i0+mc, p0:p0+kc] into kMr-row panels, depth-major within a
// panel, zero-padding the last panel.
void pack_a(bool trans, const float* a, std::size_t lda, std::size_t i0,
            std::size_t mc, std::size_t p0, std::size_t kc, float* out) {
  for (std::size_t ir = 0; ir < mc; ir += kMr) {
    const std::size_t rows = std::min(kMr, mc - ir);
    for (std::size_t p = 0; p < kc; ++p) {
      for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t i = i0 + ir + r, q = p0 + p;
        out[r] = trans ? a[q * lda + i] : a[i * lda + q];
      }
      for (std::size_t r = rows; r < kMr; ++r) out[r] = 0.0f;
      out += kMr;
    }
  }
}

// Packs op(B)[p0:p0+kc, j0:j0+nc] into kNr-column panels.
void pack_b(bool trans, const float* b, std::size_t ldb, std::size_t p0,
            std::size_t kc, std::size_t j0, std::size_t nc, float* out) {
  for (std::size_t jr = 0; jr < nc; jr += kNr) {
    const std::size_t cols = std::min(kNr, nc - jr);
    if (!trans) {
      for (std::size_t p = 0; p < kc; ++p) {
        const float* src = b + (p0 + p) * ldb + j0 + jr;
        std::copy(src, src + cols, out);
        std::fill(out + cols, out + kNr, 0.0f);
        out += kNr;
      }
    } else {
      for (std::size_t p = 0; p < kc; ++p) {
        for (std::size_t c = 0; c < cols; ++c) out[c] = b[(j0 + jr + c) * ldb + p0 + p];
        std::fill(out + cols, out + kNr, 0.0f);
        out += kNr;
      }
    }
  }
}

// C[rows x cols] (+)= packed A panel * packed B panel.
// b advances by ldb per depth step (kNr for a packed panel).
void micro(std::size_t kc, const float* a, const float* b, std::size_t ldb, float* c,
           std::size_t ldc, std::size_t rows, std::size_t cols, bool load_c) {
  // Named accumulators: an indexed array gets spilled to the stack by gcc.
  __m256 c00 = _mm256_setzero_ps(), c01 = c00, c10 = c00, c11 = c00, c20 = c00, c21 = c00;
  __m256 c30 = c00, c31 = c00, c40 = c00, c41 = c00, c50 = c00, c51 = c00;
  for (std::size_t p = 0; p < kc; ++p) {
    const __m256 b0 = _mm256_loadu_ps(b);
    const __m256 b1 = _mm256_loadu_ps(b + 8);
    __m256 av = _mm256_broadcast_ss(a);
    c00 = _mm256_fmadd_ps(av, b0, c00);
    c01 = _mm256_fmadd_ps(av, b1, c01);
    av = _mm256_broadcast_ss(a + 1);
    c10 = _mm256_fmadd_ps(av, b0, c10);
    c11 = _mm256_fmadd_ps(av, b1, c11);
    av = _mm256_broadcast_ss(a + 2);
    c20 = _mm256_fmadd_ps(av, b0, c20);
    c21 = _mm256_fmadd_ps(av, b1, c21);
    av = _mm256_broadcast_ss(a + 3);
    c30 = _mm256_fmadd_ps(av, b0, c30);
    c31 = _mm256_fmadd_ps(av, b1, c31);
    av = _mm256_broadcast_ss(a + 4);
    c40 = _mm256_fmadd_ps(av, b0, c40);
    c41 = _mm256_fmadd_ps(av, b1, c41);
    av = _mm256_broadcast_ss(a + 5);
    c50 = _mm256_fmadd_ps(av, b0, c50);
    c51 = _mm256_fmadd_ps(av, b1, c51);
    a += kMr;
    b += ldb;
  }
  __m256 acc[kMr][2] = {{c00, c01}, {c10, c11}, {c20, c21}, {c30, c31}, {c40, c41}, {c50, c51}};
  if (rows == kMr && cols == kNr) {
    for (std::size_t r = 0; r < kMr; ++r) {
      float* crow = c + r * ldc;
      if (load_c) {
        acc[r][0] = _mm256_add_ps(acc[r][0], _mm256_loadu_ps(crow));
        acc[r][1] = _mm256_add_ps(acc[r][1], _mm256_loadu_ps(crow + 8));
      }
      _mm256_storeu_ps(crow, acc[r][0]);
      _mm256_storeu_ps(crow + 8, acc[r][1]);
    }
    return;
  }
  // Edge tile: spill through a buffer so acc stays indexable at compile time.
  alignas(32) float tile[kMr * kNr];
  for (std::size_t r = 0; r < kMr; ++r) {
    _mm256_store_ps(tile + r * kNr, acc[r][0]);
    _mm256_store_ps(tile + r * kNr + 8, acc[r][1]);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    float* crow = c + r * ldc;
    const float* trow = tile + r * kNr;
    if (load_c)
      for (std::size_t j = 0; j < cols; ++j) crow[j] += trow[j];
    else
      std::copy(trow, trow + cols, crow);
  }
}

void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n,
          std::size_t k, const float* a, std::size_t lda, const float* b,
          std::size_t ldb, float* c, std::size_t ldc, bool accumulate) {
  if (m == 0 || n == 0) return;
  if (k == 0) {
    if (!accumulate)
      for (std::size_t i = 0; i < m; ++i) std::fill(c + i * ldc, c + i * ldc + n, 0.0f);
    return;
  }
  thread_local std::vector<float> bpack, apack;
  bpack.resize(kKc * (kNc + kNr));
  apack.resize(kKc * (kMc + kMr));
  for (std::size_t j0 = 0; j0 < n; j0 += kNc) {
    const std::size_t nc = std::min(kNc, n - j0);
    for (std::size_t p0 = 0; p0 < k; p0 += kKc) {
      const std::size_t kc = std::min(kKc, k - p0);
      const bool load_c = accumulate || p0 > 0;
      pack_b(trans_b, b, ldb, p0, kc, j0, nc, bpack.data());
      for (std::size_t i0 = 0; i0 < m; i0 += kMc) {
        const std::size_t mc = std::min(kMc, m - i0);
        pack_a(trans_a, a, lda, i0, mc, p0, kc, apack.data());
        for (std::size_t jr = 0; jr < nc; jr += kNr) {
          const std::size_t cols = std::min(kNr, nc - jr);
          const float* bp = bpack.data() + (jr / kNr) * kc * kNr;
          for (std::size_t ir = 0; ir < mc; ir += kMr) {
            micro(kc, apack.data() + (ir / kMr) * kc * kMr, bp, kNr,
                  c + (i0 + ir) * ldc + j0 + jr, ldc, std::min(kMr, mc - ir), cols, load_c);
          }
        }
      }
    }
  }
}

template <typename Vec, typename Tail>
inline void for_each_block(std::size_t n, Vec&& vec, Tail&& tail) {
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) vec(i);
  for (; i < n; ++i) tail(i);
}

void add(std::size_t n, const float* a, const float* b, float* out) {
  for_each_block(
      n,
      [&](std::size_t i) {
        _mm256_storeu_ps(out + i, _mm256_add_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
      },
      [&](std::size_t i) { out[i] = a[i] + b[i]; });
}

void sub(std::size_t n, const float* a, const float* b, float* out) {
  for_each_block(
      n,
      [&](std::size_t i) {
        _mm256_storeu_ps(out + i, _mm256_sub_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
      },
      [&](std::size_t i) { out[i] = a[i] - b[i]; });
}

void mul(std::size_t n, const float* a, const float* b, float* out) {
  for_each_block(
      n,
      [&](std::size_t i) {
        _mm256_storeu_ps(out + i, _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i)));
      },
      [&](std::size_t i) { out[i] = a[i] * b[i]; });
}

// Unfused multiply-add so that results match the scalar reference exactly.
void axpy(std::size_t n, float alpha, const float* x, float* y) {
  const __m256 av = _mm256_set1_ps(alpha);
  for_each_block(
      n,
      [&](std::size_t i) {
        const __m256 prod = _mm256_mul_ps(av, _mm256_loadu_ps(x + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
      },
      [&](std::size_t i) { y[i] += alpha * x[i]; });
}

void scale(std::size_t n, float alpha, const float* x, float* out) {
  const __m256 av = _mm256_set1_ps(alpha);
  for_each_block(
      n,
      [&](std::size_t i) { _mm256_storeu_ps(out + i, _mm256_mul_ps(av, _mm256_loadu_ps(x + i))); },
      [&](std::size_t i) { out[i] = alpha * x[i]; });
}

void mul_acc(std::size_t n, const float* a, const float* b, float* y) {
  for_each_block(
      n,
      [&](std::size_t i) {
        const __m256 prod = _mm256_mul_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
      },
      [&](std::size_t i) { y[i] += a[i] * b[i]; });
}

void relu(std::size_t n, const float* x, float* out) {
  const __m256 zero = _mm256_setzero_ps();
  for_each_block(
      n,
      [&](std::size_t i) {
        const __m256 xv = _mm256_loadu_ps(x + i);
        const __m256 pos = _mm256_cmp_ps(xv, zero, _CMP_GT_OQ);
        _mm256_storeu_ps(out + i, _mm256_and_ps(pos, xv));
      },
      [&](std::size_t i) { out[i] = x[i] > 0.0f ? x[i] : 0.0f; });
}

void relu_backward(std::size_t n, const float* x, const float* gout, float* gin) {
  const __m256 zero = _mm256_setzero_ps();
  for_each_block(
      n,
      [&](std::size_t i) {
        const __m256 pos = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        const __m256 g = _mm256_loadu_ps(gin + i);
        const __m256 updated = _mm256_add_ps(g, _mm256_loadu_ps(gout + i));
        _mm256_storeu_ps(gin + i, _mm256_blendv_ps(g, updated, pos));
      },
      [&](std::size_t i) {
        if (x[i] > 0.0f) gin[i] += gout[i];
      });
}

void leaky_relu(std::size_t n, float slope, const float* x, float* out) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 sv = _mm256_set1_ps(slope);
  for_each_block(
      n,
      [&](std::size_t i) {
        const __m256 xv = _mm256_loadu_ps(x + i);
        const __m256 pos = _mm256_cmp_ps(xv, zero, _CMP_GT_OQ);
        _mm256_storeu_ps(out + i, _mm256_blendv_ps(_mm256_mul_ps(sv, xv), xv, pos));
      },
      [&](std::size_t i) { out[i] = x[i] > 0.0f ? x[i] : slope * x[i]; });
}

void leaky_relu_backward(std::size_t n, float slope, const float* x,
                         const float* gout, float* gin) {
  const __m256 zero = _mm256_setzero_ps();
  const __m256 sv = _mm256_set1_ps(slope);
  for_each_block(
      n,
      [&](std::size_t i) {
        const __m256 pos = _mm256_cmp_ps(_mm256_loadu_ps(x + i), zero, _CMP_GT_OQ);
        const __m256 go = _mm256_loadu_ps(gout + i);
        const __m256 d = _mm256_blendv_ps(_mm256_mul_ps(sv, go), go, pos);
        _mm256_storeu_ps(gin + i, _mm256_add_ps(_mm256_loadu_ps(gin + i), d));
      },
      [&](std::size_t i) { gin[i] += x[i] > 0.0f ? gout[i] : slope * gout[i]; });
}

inline float horizontal_sum(__m256 v) {
  const __m128 lo = _mm256_castps256_ps128(v);
  const __m128 hi = _mm256_extractf128_ps(v, 1);
  __m128 s = _mm_add_ps(lo, hi);
  s = _mm_add_ps(s, _mm_movehl_ps(s, s));
  s = _mm_add_ss(s, _mm_shuffle_ps(s, s, 0x55));
  return _mm_cvtss_f32(s);
}

float sum(std::size_t n, const float* x) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_add_ps(acc0, _mm256_loadu_ps(x + i));
    acc1 = _mm256_add_ps(acc1, _mm256_loadu_ps(x + i + 8));
  }
  for (; i + 8 <= n; i += 8) acc0 = _mm256_add_ps(acc0, _mm256_loadu_ps(x + i));
  float s = horizontal_sum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) s += x[i];
  return s;
}

float dot(std::size_t n, const float* a, const float* b) {
  __m256 acc0 = _mm256_setzero_ps();
  __m256 acc1 = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
  }
  for (; i + 8 <= n; i += 8)
    acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
  float s = horizontal_sum(_mm256_add_ps(acc0, acc1));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

bool all_finite(std::size_t n, const float* x) {
  // x - x is 0 for finite x and NaN for +-inf or NaN.
  __m256 bad = _mm256_setzero_ps();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    const __m256 xv = _mm256_loadu_ps(x + i);
    bad = _mm256_or_ps(bad, _mm256_cmp_ps(_mm256_sub_ps(xv, xv), _mm256_setzero_ps(), _CMP_NEQ_UQ));
  }
  if (_mm256_movemask_ps(bad) != 0) return false;
  for (; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

void adam(std::size_t n, float* theta, const float* grad, float* m, float* v,
          const AdamCoeffs<float>& c) {
  const float omb1 = 1.0f - c.beta1;
  const float omb2 = 1.0f - c.beta2;
  const __m256 b1 = _mm256_set1_ps(c.beta1);
  const __m256 b2 = _mm256_set1_ps(c.beta2);
  const __m256 o1 = _mm256_set1_ps(omb1);
  const __m256 o2 = _mm256_set1_ps(omb2);
  const __m256 step = _mm256_set1_ps(c.step_size);
  const __m256 ib2 = _mm256_set1_ps(c.inv_bias2);
  const __m256 eps = _mm256_set1_ps(c.eps);
  for_each_block(
      n,
      [&](std::size_t i) {
        const __m256 g = _mm256_loadu_ps(grad + i);
        const __m256 mi = _mm256_add_ps(_mm256_mul_ps(b1, _mm256_loadu_ps(m + i)), _mm256_mul_ps(o1, g));
        const __m256 vi = _mm256_add_ps(_mm256_mul_ps(b2, _mm256_loadu_ps(v + i)),
                                        _mm256_mul_ps(o2, _mm256_mul_ps(g, g)));
        _mm256_storeu_ps(m + i, mi);
        _mm256_storeu_ps(v + i, vi);
        const __m256 denom = _mm256_add_ps(_mm256_sqrt_ps(_mm256_mul_ps(vi, ib2)), eps);
        const __m256 upd = _mm256_div_ps(_mm256_mul_ps(step, mi), denom);
        _mm256_storeu_ps(theta + i, _mm256_sub_ps(_mm256_loadu_ps(theta + i), upd));
      },
      [&](std::size_t i) {
        const float g = grad[i];
        const float mi = c.beta1 * m[i] + omb1 * g;
        const float vi = c.beta2 * v[i] + omb2 * (g * g);
        m[i] = mi;
        v[i] = vi;
        theta[i] -= c.step_size * mi / (std::sqrt(vi * c.inv_bias2) + c.eps);
      });
}

}  // namespace

const KernelTable<float>& table() {
  static const KernelTable<float> t{Backend::avx2, &gemm,         &add,
                                    &sub,          &mul,          &axpy,
                                    &scale,        &mul_acc,      &relu,
                                    &relu_backward, &leaky_relu,  &leaky_relu_backward,
                                    &sum,          &dot,          &all_finite,
                                    &adam};
  return t;
}

}  // namespace xgan::kernels::avx2
