#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace bcr {

// Thin wrapper over mt19937_64. The 64-bit Mersenne Twister output sequence
// is fixed by the standard, and the double conversion below is done by hand,
// so a seed reproduces the same draws on every conforming toolchain.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::uint64_t next_u64() { return engine_(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Derives an independent child seed; used to give each diagnostic cell its
  // own stream while keeping the parent sequence deterministic.
  std::uint64_t derive_seed() { return splitmix(engine_()); }

  static std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }

 private:
  std::mt19937_64 engine_;
};

// Inverse-CDF draw over a probability vector in its fixed index order.
// Zero-probability entries are never returned; if rounding leaves u beyond
// the accumulated mass, the last positive entry is chosen.
std::size_t sample_index(std::span<const double> probs, double u);

inline std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  return sample_index(probs, rng.uniform());
}

}  // namespace bcr
