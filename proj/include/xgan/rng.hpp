#pragma once
// Counter-based random numbers (Philox4x32-10).
//
// A generator is addressed by (seed, stream). Streams are derived by
// hashing, so the draws used for weight init, data sampling and the
// reparameterization noise never interfere with each other and any step of
// training can recreate its own stream without replaying earlier ones.

#include <array>
#include <cstdint>
#include <string_view>

namespace xgan {

/// 64-bit FNV-1a, used to turn names into stream ids.
std::uint64_t fnv1a64(std::string_view s);

/// Mixes two 64-bit values into one (splitmix64 finalizer on a combination).
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

/// Raw Philox4x32 with 10 rounds.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// Independent child stream; the parent is not advanced.
  Rng split(std::uint64_t substream) const;
  Rng split(std::string_view name) const { return split(fnv1a64(name)); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint32_t next_u32();
  std::uint64_t next_u64();
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal via Box-Muller.
  double normal();

 private:
  void refill();

  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t block_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int used_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace xgan
