#include "xgan/kernels/kernels.hpp"

#include <cstdlib>
#include <string>

namespace xgan::kernels {

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::scalar: return "scalar";
    case Backend::avx2: return "avx2";
  }
  return "unknown";
}

bool cpu_supports(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(XGAN_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

template <>
const KernelTable<float>* kernels_for<float>(Backend b) {
  if (b == Backend::scalar) return &scalar::table<float>();
#if defined(XGAN_HAVE_AVX2)
  if (b == Backend::avx2 && cpu_supports(Backend::avx2)) return &avx2::table();
#endif
  return nullptr;
}

// Double precision is only used by gradient-check oracles.
template <>
const KernelTable<double>* kernels_for<double>(Backend b) {
  if (b == Backend::scalar) return &scalar::table<double>();
  return nullptr;
}

namespace {

bool scalar_forced() {
  const char* env = std::getenv("XGAN_SIMD");
  return env != nullptr && std::string(env) == "scalar";
}

}  // namespace

template <>
const KernelTable<float>& active<float>() {
  static const KernelTable<float>* chosen = [] {
    if (!scalar_forced())
      if (const auto* t = kernels_for<float>(Backend::avx2)) return t;
    return &scalar::table<float>();
  }();
  return *chosen;
}

template <>
const KernelTable<double>& active<double>() {
  return scalar::table<double>();
}

}  // namespace xgan::kernels
