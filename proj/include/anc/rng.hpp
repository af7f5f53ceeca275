#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace anc {

/// Portable seeded generator: xoshiro256** (Blackman & Vigna) whose 256-bit
/// state is filled from the 64-bit seed by four splitmix64 outputs.
///
///   splitmix64:  z = (x += 0x9E3779B97F4A7C15);
///                z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
///                z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
///                return z ^ (z >> 31);
///   xoshiro256**: result = rotl(s1 * 5, 7) * 9;  t = s1 << 17;
///                s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t;
///                s3 = rotl(s3, 45);
///
/// Uniform doubles take the top 53 bits; normals use the Box-Muller pair
/// (cos branch first, sin branch cached). Nothing here depends on the
/// standard library's distribution objects, whose output is
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const noexcept { return seed_; }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Uniform integer in [0, n), rejection-sampled so it is unbiased.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();

  /// Independent generator for sub-stream `stream`, derived only from the
  /// seed. Used to give every dataset instance its own stream so parallel
  /// generation is schedule-independent.
  Rng fork(std::uint64_t stream) const;

 private:
  std::uint64_t seed_;
  std::array<std::uint64_t, 4> state_{};
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t& x);

/// Seeded Fisher-Yates permutation of 0..n-1.
std::vector<std::size_t> permutation(Rng& rng, std::size_t n);

}  // namespace anc
