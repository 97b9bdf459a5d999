#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace icepose {

// Deterministic random source. std::mt19937_64 has a fully standardized
// output sequence; the std::*_distribution adapters do not, so every value
// mapping here is spelled out explicitly. Streams are therefore bit-identical
// across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Lemire multiply-shift; the bias of n/2^64 is
  // irrelevant at the sizes used here.
  std::uint64_t bounded(std::uint64_t n) {
    const auto x = static_cast<unsigned __int128>(eng_());
    return static_cast<std::uint64_t>((x * n) >> 64);
  }

  // Standard normal via Box-Muller, second value cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // Normal with std `stddev`, redrawn until within `bound_stddevs` sigma.
  double truncated_normal(double stddev, double bound_stddevs = 2.0) {
    double z = normal();
    while (std::abs(z) > bound_stddevs) z = normal();
    return z * stddev;
  }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Derives an independent child seed from a parent seed and a stream tag
// (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) {
  std::uint64_t z = parent + 0x9e3779b97f4a7c15ull * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace icepose
