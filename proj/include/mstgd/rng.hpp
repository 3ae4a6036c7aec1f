#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace mstgd::rng {

// SplitMix64 step. Used both as the seed mixer for stream derivation and as
// the per-draw generator, so every draw is reproducible from (seed, stream).
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Derives an independent substream seed from (seed, a, b, c). The harness
// convention is a=experiment/usage id, b=repetition, c=category or role.
inline std::uint64_t derive(std::uint64_t seed, std::uint64_t a = 0,
                            std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = seed;
  std::uint64_t z = splitmix64(s);
  s ^= a + 0x9e3779b97f4a7c15ULL;
  z ^= splitmix64(s);
  s ^= b + 0xbf58476d1ce4e5b9ULL;
  z ^= splitmix64(s);
  s ^= c + 0x94d049bb133111ebULL;
  z ^= splitmix64(s);
  return z;
}

// xoshiro-free minimal engine: SplitMix64 stream. Bit-portable across
// platforms and standard libraries (no std::*_distribution involved).
class Engine {
 public:
  explicit Engine(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // Uniform double in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Lemire multiply-shift, unbiased enough for
  // n << 2^64 and fully deterministic.
  std::uint64_t next_below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("next_below: n must be positive");
    __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
    return static_cast<std::uint64_t>(m >> 64);
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller; one value per call, no cached spare, so
  // the stream position is a pure function of the call count.
  double normal() {
    double u1 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    const double u2 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

 private:
  std::uint64_t state_;
};

// Uniform draw of `count` distinct indices from [0, n), partial Fisher-Yates.
std::vector<long> sample_without_replacement(long n, long count, Engine& eng);

}  // namespace mstgd::rng
