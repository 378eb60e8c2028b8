#include "xgan/ops.hpp"

#include <algorithm>
#include <utility>
#include <cmath>
#include <cstdint>
#include <string>

#include "xgan/errors.hpp"
#include "xgan/kernels/kernels.hpp"

namespace xgan {
namespace {

template <typename T>
const kernels::KernelTable<T>& kt() {
  return kernels::active<T>();
}

template <typename T>
Tape<T>* tape_of(const char* op, std::initializer_list<const Tensor<T>*> inputs) {
  Tape<T>* tape = nullptr;
  for (const auto* t : inputs) {
    if (!t->tracked()) continue;
    if (tape != nullptr && tape != t->tape())
      throw ContractError(std::string(op) + ": inputs recorded on different tapes");
    tape = t->tape();
  }
  return tape;
}

template <typename T>
Tensor<T> make_output(const char* op, Shape shape, std::vector<T> data) {
  if (!kt<T>().all_finite(data.size(), data.data()))
    throw NumericError(std::string(op) + ": non-finite value in output " + shape_str(shape));
  return Tensor<T>::unchecked(std::move(shape), std::move(data));
}

template <typename T>
Tensor<T> finish(Tape<T>* tape, const Tensor<T>& out, typename Tape<T>::BackwardFn fn) {
  return tape != nullptr ? tape->record(out, std::move(fn)) : out;
}

[[noreturn]] void shape_fail(const char* op, const std::string& what) {
  throw ShapeError(std::string(op) + ": " + what);
}

template <typename T>
void require_same_shape(const char* op, const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    shape_fail(op, "shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

// C[m x n] (+)= op(A) op(B); A is stored k x m when trans_a, B is n x k when trans_b.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a,
          const T* b, T* c, bool accumulate) {
  kt<T>().gemm(trans_a, trans_b, m, n, k, a, trans_a ? m : k, b, trans_b ? k : n, c, n, accumulate);
}

struct ConvGeom {
  std::size_t n, c, h, w;  // image side
  std::size_t kh, kw, stride, pad;
  std::size_t oh, ow;      // conv output side
  std::size_t rows() const { return c * kh * kw; }
  std::size_t cols() const { return n * oh * ow; }
};

// Output columns ox whose input column ox*stride + kj - pad lies inside the image.
// Output positions o in [0, out) whose input o*stride + off - pad lies in [0, in).
std::pair<std::size_t, std::size_t> valid_range(std::size_t out, std::size_t in, std::size_t stride,
                                                std::size_t pad, std::size_t off) {
  std::size_t lo = 0;
  if (pad > off) lo = (pad - off + stride - 1) / stride;
  std::size_t hi = 0;
  if (in + pad > off) hi = std::min(out, (in - 1 + pad - off) / stride + 1);
  return {std::min(lo, hi), hi};
}

// Column matrix [C*KH*KW, OH*OW] of a single image x: [C, H, W].
template <typename T>
void im2col(const T* x, const ConvGeom& g, T* cols) {
  const std::size_t plane = g.oh * g.ow;
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      const auto [ylo, yhi] = valid_range(g.oh, g.h, g.stride, g.pad, ki);
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        T* __restrict row = cols + ((c * g.kh + ki) * g.kw + kj) * plane;
        const auto [xlo, xhi] = valid_range(g.ow, g.w, g.stride, g.pad, kj);
        std::fill(row, row + ylo * g.ow, T(0));
        for (std::size_t oy = ylo; oy < yhi; ++oy) {
          const T* __restrict src = x + (c * g.h + oy * g.stride + ki - g.pad) * g.w;
          T* __restrict d = row + oy * g.ow;
          for (std::size_t ox = 0; ox < xlo; ++ox) d[ox] = T(0);
          if (g.stride == 1) {
            const T* __restrict s = src + xlo + kj - g.pad;
            for (std::size_t i = 0; i < xhi - xlo; ++i) d[xlo + i] = s[i];
          } else {
            for (std::size_t ox = xlo; ox < xhi; ++ox) d[ox] = src[ox * g.stride + kj - g.pad];
          }
          for (std::size_t ox = xhi; ox < g.ow; ++ox) d[ox] = T(0);
        }
        std::fill(row + yhi * g.ow, row + plane, T(0));
      }
    }
}

// Adjoint of im2col: scatter-adds the columns back into x: [C, H, W].
template <typename T>
void col2im(const T* cols, const ConvGeom& g, T* x) {
  const std::size_t plane = g.oh * g.ow;
  for (std::size_t c = 0; c < g.c; ++c)
    for (std::size_t ki = 0; ki < g.kh; ++ki) {
      const auto [ylo, yhi] = valid_range(g.oh, g.h, g.stride, g.pad, ki);
      for (std::size_t kj = 0; kj < g.kw; ++kj) {
        const T* __restrict row = cols + ((c * g.kh + ki) * g.kw + kj) * plane;
        const auto [xlo, xhi] = valid_range(g.ow, g.w, g.stride, g.pad, kj);
        for (std::size_t oy = ylo; oy < yhi; ++oy) {
          T* __restrict d = x + (c * g.h + oy * g.stride + ki - g.pad) * g.w;
          const T* __restrict s = row + oy * g.ow;
          if (g.stride == 1) {
            T* __restrict dd = d + xlo + kj - g.pad;
            for (std::size_t i = 0; i < xhi - xlo; ++i) dd[i] += s[xlo + i];
          } else {
            for (std::size_t ox = xlo; ox < xhi; ++ox) d[ox * g.stride + kj - g.pad] += s[ox];
          }
        }
      }
    }
}

template <typename T, typename F, typename D>
Tensor<T> unary(const char* op, const Tensor<T>& x, F&& f, D&& dfdx) {
  std::vector<T> out(x.size());
  const T* xp = x.ptr();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xp[i]);
  Tensor<T> y = make_output(op, x.shape(), std::move(out));
  Tape<T>* tape = tape_of<T>(op, {&x});
  if (tape == nullptr) return y;
  return tape->record(y, [x, y, dfdx](std::span<const T> g, Tape<T>& t) {
    auto gx = t.grad_buffer(x);
    const T* xp = x.ptr();
    const T* yp = y.ptr();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * dfdx(xp[i], yp[i]);
  });
}

// Split of a shape around `axis`: outer * len * inner.
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t i = 0; i < axis; ++i) r.outer *= s[i];
  r.len = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) r.inner *= s[i];
  return r;
}

}  // namespace

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("add", a, b);
  std::vector<T> out(a.size());
  kt<T>().add(out.size(), a.ptr(), b.ptr(), out.data());
  return finish(tape_of<T>("add", {&a, &b}), make_output("add", a.shape(), std::move(out)),
                [a, b](std::span<const T> g, Tape<T>& t) {
                  t.accumulate(a, g);
                  t.accumulate(b, g);
                });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("sub", a, b);
  std::vector<T> out(a.size());
  kt<T>().sub(out.size(), a.ptr(), b.ptr(), out.data());
  return finish(tape_of<T>("sub", {&a, &b}), make_output("sub", a.shape(), std::move(out)),
                [a, b](std::span<const T> g, Tape<T>& t) {
                  t.accumulate(a, g);
                  if (t.wants_grad(b)) {
                    auto gb = t.grad_buffer(b);
                    kt<T>().axpy(gb.size(), T(-1), g.data(), gb.data());
                  }
                });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape("mul", a, b);
  std::vector<T> out(a.size());
  kt<T>().mul(out.size(), a.ptr(), b.ptr(), out.data());
  return finish(tape_of<T>("mul", {&a, &b}), make_output("mul", a.shape(), std::move(out)),
                [a, b](std::span<const T> g, Tape<T>& t) {
                  if (t.wants_grad(a)) kt<T>().mul_acc(g.size(), g.data(), b.ptr(), t.grad_buffer(a).data());
                  if (t.wants_grad(b)) kt<T>().mul_acc(g.size(), g.data(), a.ptr(), t.grad_buffer(b).data());
                });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  std::vector<T> out(a.size());
  kt<T>().scale(out.size(), factor, a.ptr(), out.data());
  return finish(tape_of<T>("scale", {&a}), make_output("scale", a.shape(), std::move(out)),
                [a, factor](std::span<const T> g, Tape<T>& t) {
                  auto ga = t.grad_buffer(a);
                  kt<T>().axpy(ga.size(), factor, g.data(), ga.data());
                });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T value) {
  std::vector<T> out(a.data().begin(), a.data().end());
  for (auto& v : out) v += value;
  return finish(tape_of<T>("add_scalar", {&a}), make_output("add_scalar", a.shape(), std::move(out)),
                [a](std::span<const T> g, Tape<T>& t) { t.accumulate(a, g); });
}

template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() < 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1))
    shape_fail("add_bias", "input " + shape_str(x.shape()) + " incompatible with bias " +
                               shape_str(bias.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), inner = x.size() / (n * c);
  std::vector<T> out(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t ch = 0; ch < c; ++ch) {
      T* p = out.data() + (i * c + ch) * inner;
      const T b = bias.at(ch);
      for (std::size_t s = 0; s < inner; ++s) p[s] += b;
    }
  return finish(tape_of<T>("add_bias", {&x, &bias}), make_output("add_bias", x.shape(), std::move(out)),
                [x, bias, n, c, inner](std::span<const T> g, Tape<T>& t) {
                  t.accumulate(x, g);
                  if (t.wants_grad(bias)) {
                    auto gb = t.grad_buffer(bias);
                    for (std::size_t i = 0; i < n; ++i)
                      for (std::size_t ch = 0; ch < c; ++ch)
                        gb[ch] += kt<T>().sum(inner, g.data() + (i * c + ch) * inner);
                  }
                });
}

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0))
    shape_fail("matmul", "cannot multiply " + shape_str(a.shape()) + " by " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  gemm(false, false, m, n, k, a.ptr(), b.ptr(), out.data(), false);
  return finish(tape_of<T>("matmul", {&a, &b}), make_output("matmul", {m, n}, std::move(out)),
                [a, b, m, n, k](std::span<const T> g, Tape<T>& t) {
                  if (t.wants_grad(a)) gemm(false, true, m, k, n, g.data(), b.ptr(), t.grad_buffer(a).data(), true);
                  if (t.wants_grad(b)) gemm(true, false, k, n, m, a.ptr(), g.data(), t.grad_buffer(b).data(), true);
                });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& kernel, Conv2dOptions opts) {
  if (x.rank() != 4 || kernel.rank() != 4 || x.dim(1) != kernel.dim(1))
    shape_fail("conv2d", "input " + shape_str(x.shape()) + " incompatible with kernel " +
                             shape_str(kernel.shape()));
  if (opts.stride == 0) shape_fail("conv2d", "stride must be positive");
  ConvGeom geo{x.dim(0), x.dim(1), x.dim(2), x.dim(3), kernel.dim(2), kernel.dim(3), opts.stride, opts.padding, 0, 0};
  if (geo.h + 2 * geo.pad < geo.kh || geo.w + 2 * geo.pad < geo.kw)
    shape_fail("conv2d", "kernel " + shape_str(kernel.shape()) + " larger than padded input " +
                             shape_str(x.shape()));
  geo.oh = (geo.h + 2 * geo.pad - geo.kh) / geo.stride + 1;
  geo.ow = (geo.w + 2 * geo.pad - geo.kw) / geo.stride + 1;
  const std::size_t out_c = kernel.dim(0);
  // Work one image at a time so the column buffer stays cache-resident.
  ConvGeom one = geo;
  one.n = 1;
  const std::size_t in_size = geo.c * geo.h * geo.w, out_size = out_c * geo.oh * geo.ow;

  std::vector<T> cols(one.rows() * one.cols());
  std::vector<T> out(geo.n * out_size);
  for (std::size_t i = 0; i < geo.n; ++i) {
    im2col(x.ptr() + i * in_size, one, cols.data());
    gemm(false, false, out_c, one.cols(), one.rows(), kernel.ptr(), cols.data(), out.data() + i * out_size,
         false);
  }
  Tensor<T> y = make_output("conv2d", {geo.n, out_c, geo.oh, geo.ow}, std::move(out));

  Tape<T>* tape = tape_of<T>("conv2d", {&x, &kernel});
  if (tape == nullptr) return y;
  return tape->record(y, [x, kernel, one, out_c, in_size, out_size](std::span<const T> g, Tape<T>& t) {
    const bool want_w = t.wants_grad(kernel), want_x = t.wants_grad(x);
    std::vector<T> cols(one.rows() * one.cols());
    T* dw = want_w ? t.grad_buffer(kernel).data() : nullptr;
    T* dx = want_x ? t.grad_buffer(x).data() : nullptr;
    for (std::size_t i = 0; i * in_size < x.size(); ++i) {
      const T* gi = g.data() + i * out_size;
      if (want_w) {
        im2col(x.ptr() + i * in_size, one, cols.data());
        gemm(false, true, out_c, one.rows(), one.cols(), gi, cols.data(), dw, true);
      }
      if (want_x) {
        gemm(true, false, one.rows(), one.cols(), out_c, kernel.ptr(), gi, cols.data(), false);
        col2im(cols.data(), one, dx + i * in_size);
      }
    }
  });
}

template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& kernel, Conv2dOptions opts) {
  if (x.rank() != 4 || kernel.rank() != 4 || x.dim(1) != kernel.dim(0))
    shape_fail("conv2d_transpose", "input " + shape_str(x.shape()) + " incompatible with kernel " +
                                       shape_str(kernel.shape()));
  if (opts.stride == 0 || opts.output_padding >= opts.stride)
    shape_fail("conv2d_transpose", "output_padding must be smaller than a positive stride");
  const std::size_t n = x.dim(0), in_c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t kh = kernel.dim(2), kw = kernel.dim(3), out_c = kernel.dim(1);
  const std::ptrdiff_t oh = static_cast<std::ptrdiff_t>((h - 1) * opts.stride + kh + opts.output_padding) -
                            2 * static_cast<std::ptrdiff_t>(opts.padding);
  const std::ptrdiff_t ow = static_cast<std::ptrdiff_t>((w - 1) * opts.stride + kw + opts.output_padding) -
                            2 * static_cast<std::ptrdiff_t>(opts.padding);
  if (oh <= 0 || ow <= 0) shape_fail("conv2d_transpose", "padding too large for " + shape_str(x.shape()));

  // Geometry of the forward conv whose adjoint this is (image = our output),
  // for a single image.
  const ConvGeom one{1, out_c, static_cast<std::size_t>(oh), static_cast<std::size_t>(ow), kh, kw,
                     opts.stride, opts.padding, h, w};
  const std::size_t in_size = in_c * h * w, out_size = out_c * one.h * one.w;

  std::vector<T> cols(one.rows() * one.cols());
  std::vector<T> out(n * out_size, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    gemm(true, false, one.rows(), one.cols(), in_c, kernel.ptr(), x.ptr() + i * in_size, cols.data(), false);
    col2im(cols.data(), one, out.data() + i * out_size);
  }
  Tensor<T> y = make_output("conv2d_transpose", {n, out_c, one.h, one.w}, std::move(out));

  Tape<T>* tape = tape_of<T>("conv2d_transpose", {&x, &kernel});
  if (tape == nullptr) return y;
  return tape->record(y, [x, kernel, one, n, in_c, in_size, out_size](std::span<const T> g, Tape<T>& t) {
    const bool want_w = t.wants_grad(kernel), want_x = t.wants_grad(x);
    std::vector<T> gcols(one.rows() * one.cols());
    T* dw = want_w ? t.grad_buffer(kernel).data() : nullptr;
    T* dx = want_x ? t.grad_buffer(x).data() : nullptr;
    std::vector<T> dxi(want_x ? in_size : 0);
    for (std::size_t i = 0; i < n; ++i) {
      im2col(g.data() + i * out_size, one, gcols.data());
      if (want_x) {
        gemm(false, false, in_c, one.cols(), one.rows(), kernel.ptr(), gcols.data(), dxi.data(), false);
        kt<T>().axpy(in_size, T(1), dxi.data(), dx + i * in_size);
      }
      if (want_w)
        gemm(false, true, in_c, one.rows(), one.cols(), x.ptr() + i * in_size, gcols.data(), dw, true);
    }
  });
}

template <typename T>
Tensor<T> maxpool2d(const Tensor<T>& x, std::size_t window, std::size_t stride) {
  if (x.rank() != 4 || window == 0 || stride == 0 || x.dim(2) < window || x.dim(3) < window)
    shape_fail("maxpool2d", "window " + std::to_string(window) + " invalid for " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t oh = (h - window) / stride + 1, ow = (w - window) / stride + 1;
  std::vector<T> out(n * c * oh * ow);
  auto argmax = std::make_shared<std::vector<std::uint32_t>>(out.size());
  const T* xp = x.ptr();
  std::size_t o = 0;
  for (std::size_t p = 0; p < n * c; ++p)
    for (std::size_t oy = 0; oy < oh; ++oy)
      for (std::size_t ox = 0; ox < ow; ++ox, ++o) {
        std::size_t best = p * h * w + oy * stride * w + ox * stride;
        for (std::size_t ky = 0; ky < window; ++ky)
          for (std::size_t kx = 0; kx < window; ++kx) {
            const std::size_t idx = p * h * w + (oy * stride + ky) * w + ox * stride + kx;
            if (xp[idx] > xp[best]) best = idx;
          }
        out[o] = xp[best];
        (*argmax)[o] = static_cast<std::uint32_t>(best);
      }
  return finish(tape_of<T>("maxpool2d", {&x}), make_output("maxpool2d", {n, c, oh, ow}, std::move(out)),
                [x, argmax](std::span<const T> g, Tape<T>& t) {
                  auto gx = t.grad_buffer(x);
                  for (std::size_t i = 0; i < g.size(); ++i) gx[(*argmax)[i]] += g[i];
                });
}

template <typename T>
Tensor<T> batchnorm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta,
                    const BatchNormOptions<T>& opts) {
  if (x.rank() < 2 || gamma.shape() != Shape{x.dim(1)} || beta.shape() != Shape{x.dim(1)})
    shape_fail("batchnorm", "input " + shape_str(x.shape()) + " with gamma " + shape_str(gamma.shape()) +
                                " and beta " + shape_str(beta.shape()));
  const std::size_t n = x.dim(0), c = x.dim(1), inner = x.size() / (n * c);
  const std::size_t count = n * inner;
  const bool train = opts.mode == BatchNormMode::train;
  const bool have_running = opts.running_mean.size() == c && opts.running_var.size() == c;
  if (!train && !have_running) throw ContractError("batchnorm: eval mode needs running statistics");
  if ((!opts.running_mean.empty() || !opts.running_var.empty()) && !have_running)
    shape_fail("batchnorm", "running statistics must have " + std::to_string(c) + " entries");

  const T* xp = x.ptr();
  auto inv_std = std::make_shared<std::vector<T>>(c);
  auto xhat = std::make_shared<std::vector<T>>(x.size());
  std::vector<T> out(x.size());
  for (std::size_t ch = 0; ch < c; ++ch) {
    T mu, var;
    if (train) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < inner; ++k) s += xp[(i * c + ch) * inner + k];
      const double m = s / static_cast<double>(count);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < inner; ++k) {
          const double d = xp[(i * c + ch) * inner + k] - m;
          ss += d * d;
        }
      mu = static_cast<T>(m);
      var = static_cast<T>(ss / static_cast<double>(count));
      if (have_running && opts.update_running) {
        opts.running_mean[ch] = opts.momentum * opts.running_mean[ch] + (T(1) - opts.momentum) * mu;
        opts.running_var[ch] = opts.momentum * opts.running_var[ch] + (T(1) - opts.momentum) * var;
      }
    } else {
      mu = opts.running_mean[ch];
      var = opts.running_var[ch];
    }
    const T is = T(1) / std::sqrt(var + opts.eps);
    (*inv_std)[ch] = is;
    const T gm = gamma.at(ch), bt = beta.at(ch);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < inner; ++k) {
        const std::size_t idx = (i * c + ch) * inner + k;
        const T xh = (xp[idx] - mu) * is;
        (*xhat)[idx] = xh;
        out[idx] = gm * xh + bt;
      }
  }
  Tensor<T> y = make_output("batchnorm", x.shape(), std::move(out));
  Tape<T>* tape = tape_of<T>("batchnorm", {&x, &gamma, &beta});
  if (tape == nullptr) return y;
  return tape->record(y, [x, gamma, beta, inv_std, xhat, n, c, inner, count, train](std::span<const T> g,
                                                                                   Tape<T>& t) {
    std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t k = 0; k < inner; ++k) {
          const std::size_t idx = (i * c + ch) * inner + k;
          sum_g[ch] += g[idx];
          sum_gx[ch] += g[idx] * (*xhat)[idx];
        }
    if (t.wants_grad(gamma)) {
      auto gg = t.grad_buffer(gamma);
      for (std::size_t ch = 0; ch < c; ++ch) gg[ch] += static_cast<T>(sum_gx[ch]);
    }
    if (t.wants_grad(beta)) {
      auto gb = t.grad_buffer(beta);
      for (std::size_t ch = 0; ch < c; ++ch) gb[ch] += static_cast<T>(sum_g[ch]);
    }
    if (!t.wants_grad(x)) return;
    auto gx = t.grad_buffer(x);
    const auto cnt = static_cast<double>(count);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) {
        const T scale_c = gamma.at(ch) * (*inv_std)[ch];
        const T mean_g = static_cast<T>(sum_g[ch] / cnt);
        const T mean_gx = static_cast<T>(sum_gx[ch] / cnt);
        for (std::size_t k = 0; k < inner; ++k) {
          const std::size_t idx = (i * c + ch) * inner + k;
          if (train)
            gx[idx] += scale_c * (g[idx] - mean_g - (*xhat)[idx] * mean_gx);
          else
            gx[idx] += scale_c * g[idx];
        }
      }
  });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.size());
  kt<T>().relu(out.size(), x.ptr(), out.data());
  return finish(tape_of<T>("relu", {&x}), make_output("relu", x.shape(), std::move(out)),
                [x](std::span<const T> g, Tape<T>& t) {
                  kt<T>().relu_backward(g.size(), x.ptr(), g.data(), t.grad_buffer(x).data());
                });
}

template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& x, T slope) {
  std::vector<T> out(x.size());
  kt<T>().leaky_relu(out.size(), slope, x.ptr(), out.data());
  return finish(tape_of<T>("leaky_relu", {&x}), make_output("leaky_relu", x.shape(), std::move(out)),
                [x, slope](std::span<const T> g, Tape<T>& t) {
                  kt<T>().leaky_relu_backward(g.size(), slope, x.ptr(), g.data(), t.grad_buffer(x).data());
                });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary<T>("tanh", x, [](T v) { return std::tanh(v); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>(
      "sigmoid", x,
      [](T v) {
        if (v >= T(0)) return T(1) / (T(1) + std::exp(-v));
        const T e = std::exp(v);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> log(const Tensor<T>& x) {
  return unary<T>("log", x, [](T v) { return std::log(v); }, [](T v, T) { return T(1) / v; });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& x) {
  return unary<T>("exp", x, [](T v) { return std::exp(v); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> square(const Tensor<T>& x) {
  return unary<T>("square", x, [](T v) { return v * v; }, [](T v, T) { return T(2) * v; });
}

template <typename T>
Tensor<T> maximum(const Tensor<T>& x, T floor) {
  return unary<T>("maximum", x, [floor](T v) { return v >= floor ? v : floor; },
                  [floor](T v, T) { return v >= floor ? T(1) : T(0); });
}

template <typename T>
Tensor<T> clamp(const Tensor<T>& x, T lo, T hi) {
  if (!(lo <= hi)) throw ContractError("clamp: lo must not exceed hi");
  return unary<T>("clamp", x, [lo, hi](T v) { return std::min(std::max(v, lo), hi); },
                  [lo, hi](T v, T) { return (v >= lo && v <= hi) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& x) {
  const T s = kt<T>().sum(x.size(), x.ptr());
  return finish(tape_of<T>("sum", {&x}), make_output<T>("sum", {}, {s}),
                [x](std::span<const T> g, Tape<T>& t) {
                  auto gx = t.grad_buffer(x);
                  for (auto& v : gx) v += g[0];
                });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& x) {
  if (x.size() == 0) shape_fail("mean", "empty input");
  const T count = static_cast<T>(x.size());
  const T s = kt<T>().sum(x.size(), x.ptr()) / count;
  return finish(tape_of<T>("mean", {&x}), make_output<T>("mean", {}, {s}),
                [x, count](std::span<const T> g, Tape<T>& t) {
                  auto gx = t.grad_buffer(x);
                  const T d = g[0] / count;
                  for (auto& v : gx) v += d;
                });
}

template <typename T>
Tensor<T> sum_rows(const Tensor<T>& x) {
  if (x.rank() < 1 || x.dim(0) == 0) shape_fail("sum_rows", "needs a batch axis, got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), row = x.size() / n;
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = kt<T>().sum(row, x.ptr() + i * row);
  return finish(tape_of<T>("sum_rows", {&x}), make_output("sum_rows", {n}, std::move(out)),
                [x, n, row](std::span<const T> g, Tape<T>& t) {
                  auto gx = t.grad_buffer(x);
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t k = 0; k < row; ++k) gx[i * row + k] += g[i];
                });
}

template <typename T>
Tensor<T> mean_rows(const Tensor<T>& x) {
  if (x.rank() < 1 || x.dim(0) == 0) shape_fail("mean_rows", "needs a batch axis, got " + shape_str(x.shape()));
  const std::size_t n = x.dim(0), row = x.size() / n;
  const T inv = T(1) / static_cast<T>(n);
  std::vector<T> out(row, T(0));
  for (std::size_t i = 0; i < n; ++i) kt<T>().axpy(row, T(1), x.ptr() + i * row, out.data());
  for (auto& v : out) v *= inv;
  Shape shape(x.shape().begin() + 1, x.shape().end());
  return finish(tape_of<T>("mean_rows", {&x}), make_output("mean_rows", std::move(shape), std::move(out)),
                [x, n, row, inv](std::span<const T> g, Tape<T>& t) {
                  auto gx = t.grad_buffer(x);
                  for (std::size_t i = 0; i < n; ++i) kt<T>().axpy(row, inv, g.data(), gx.data() + i * row);
                });
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) shape_fail("concat", "no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) shape_fail("concat", "axis out of range for " + shape_str(first));
  Shape out_shape = first;
  out_shape[axis] = 0;
  Tape<T>* tape = nullptr;
  for (const auto& p : parts) {
    Shape s = p.shape();
    if (s.size() != first.size()) shape_fail("concat", "rank mismatch " + shape_str(first) + " vs " + shape_str(s));
    for (std::size_t d = 0; d < s.size(); ++d)
      if (d != axis && s[d] != first[d])
        shape_fail("concat", "shape mismatch " + shape_str(first) + " vs " + shape_str(s));
    out_shape[axis] += s[axis];
    if (p.tracked()) {
      if (tape != nullptr && tape != p.tape()) throw ContractError("concat: inputs recorded on different tapes");
      tape = p.tape();
    }
  }
  const AxisSplit os = split_at(out_shape, axis);
  std::vector<T> out(shape_size(out_shape));
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t len = p.dim(axis);
    for (std::size_t o = 0; o < os.outer; ++o)
      std::copy_n(p.ptr() + o * len * os.inner, len * os.inner, out.data() + (o * os.len + offset) * os.inner);
    offset += len;
  }
  return finish(tape, make_output("concat", out_shape, std::move(out)),
                [parts, axis, os](std::span<const T> g, Tape<T>& t) {
                  std::size_t off = 0;
                  for (const auto& p : parts) {
                    const std::size_t len = p.dim(axis);
                    if (t.wants_grad(p)) {
                      auto gp = t.grad_buffer(p);
                      for (std::size_t o = 0; o < os.outer; ++o)
                        kt<T>().axpy(len * os.inner, T(1), g.data() + (o * os.len + off) * os.inner,
                                     gp.data() + o * len * os.inner);
                    }
                    off += len;
                  }
                });
}

template <typename T>
Tensor<T> slice(const Tensor<T>& x, std::size_t axis, std::size_t begin, std::size_t end) {
  if (axis >= x.rank() || begin > end || end > x.dim(axis))
    shape_fail("slice", "range [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " +
                            std::to_string(axis) + " of " + shape_str(x.shape()));
  const AxisSplit s = split_at(x.shape(), axis);
  const std::size_t len = end - begin;
  Shape out_shape = x.shape();
  out_shape[axis] = len;
  std::vector<T> out(shape_size(out_shape));
  for (std::size_t o = 0; o < s.outer; ++o)
    std::copy_n(x.ptr() + (o * s.len + begin) * s.inner, len * s.inner, out.data() + o * len * s.inner);
  return finish(tape_of<T>("slice", {&x}), make_output("slice", out_shape, std::move(out)),
                [x, s, begin, len](std::span<const T> g, Tape<T>& t) {
                  auto gx = t.grad_buffer(x);
                  for (std::size_t o = 0; o < s.outer; ++o)
                    kt<T>().axpy(len * s.inner, T(1), g.data() + o * len * s.inner,
                                 gx.data() + (o * s.len + begin) * s.inner);
                });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (shape_size(shape) != x.size())
    shape_fail("reshape", "cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  std::vector<T> out(x.data().begin(), x.data().end());
  return finish(tape_of<T>("reshape", {&x}), Tensor<T>::unchecked(std::move(shape), std::move(out)),
                [x](std::span<const T> g, Tape<T>& t) { t.accumulate(x, g); });
}

template <typename T>
Tensor<T> sample_standard_normal(Rng& rng, const Shape& shape) {
  if (shape.empty() || shape_size(shape) == 0)
    throw ContractError("sample_standard_normal: shape " + shape_str(shape) + " is empty");
  std::vector<T> out(shape_size(shape));
  for (auto& v : out) v = static_cast<T>(rng.normal());
  return Tensor<T>::unchecked(shape, std::move(out));
}

#define XGAN_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                                     \
  template Tensor<T> scale(const Tensor<T>&, T);                                                  \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                             \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                                \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                                  \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, Conv2dOptions);                   \
  template Tensor<T> conv2d_transpose(const Tensor<T>&, const Tensor<T>&, Conv2dOptions);         \
  template Tensor<T> maxpool2d(const Tensor<T>&, std::size_t, std::size_t);                       \
  template Tensor<T> batchnorm(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,              \
                               const BatchNormOptions<T>&);                                       \
  template Tensor<T> relu(const Tensor<T>&);                                                      \
  template Tensor<T> leaky_relu(const Tensor<T>&, T);                                             \
  template Tensor<T> tanh(const Tensor<T>&);                                                      \
  template Tensor<T> sigmoid(const Tensor<T>&);                                                   \
  template Tensor<T> log(const Tensor<T>&);                                                       \
  template Tensor<T> exp(const Tensor<T>&);                                                       \
  template Tensor<T> square(const Tensor<T>&);                                                    \
  template Tensor<T> maximum(const Tensor<T>&, T);                                                \
  template Tensor<T> clamp(const Tensor<T>&, T, T);                                               \
  template Tensor<T> sum(const Tensor<T>&);                                                       \
  template Tensor<T> mean(const Tensor<T>&);                                                      \
  template Tensor<T> sum_rows(const Tensor<T>&);                                                  \
  template Tensor<T> mean_rows(const Tensor<T>&);                                                 \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                          \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);              \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                            \
  template Tensor<T> sample_standard_normal(Rng&, const Shape&);

XGAN_INSTANTIATE_OPS(float)
XGAN_INSTANTIATE_OPS(double)

}  // namespace xgan
