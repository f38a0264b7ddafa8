#pragma once

#include <cmath>
#include <cstdint>
#include <random>

// Reproducible random streams. A stream is an mt19937_64 engine seeded from a
// SplitMix64 hash of (root seed, stream path); distribution mapping is done
// here explicitly so outputs do not depend on the standard library's
// implementation-defined  distributions. Stream split order for observation
// generation: frames -> persons -> cameras, then landmarks in index order
// within a stream.

namespace mvbf {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Order-sensitive seed derivation: derive_seed(s, a, b) != derive_seed(s, b, a).
inline std::uint64_t derive_seed(std::uint64_t seed) { return splitmix64(seed); }

template <typename... Rest>
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t head, Rest... rest) {
  return derive_seed(splitmix64(seed ^ splitmix64(head)), rest...);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Box-Muller (trig form): fixed two draws per pair, no rejection.
  void normal_pair(double& z0, double& z1) {
    const double u1 = 1.0 - uniform01();  // (0, 1]; keeps log finite
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    z0 = r * std::cos(a);
    z1 = r * std::sin(a);
  }

  double normal() {
    double z0, z1;
    normal_pair(z0, z1);
    return z0;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mvbf
