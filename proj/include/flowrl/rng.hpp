#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace flowrl {

// Deterministic RNG. Built on the raw 64-bit output of mt19937_64 with
// hand-rolled uniform/normal transforms, because std:: distributions are
// not bit-portable across standard libraries. Identical seeds give
// bitwise-identical streams on one platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  // Uniform on [0, 1), 53 mantissa bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Inclusive on both ends.
  int uniform_int(int lo, int hi) {
    int n = hi - lo + 1;
    int k = static_cast<int>(uniform() * n);
    return lo + (k < n ? k : n - 1);
  }

  // Box-Muller; the second value of each pair is discarded so that the
  // stream position is a pure function of the call count.
  double normal() {
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mu, double sigma) { return mu + sigma * normal(); }

  // Independent child stream, a pure function of (constructor seed, stream id).
  Rng split(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ull))); }

  std::uint64_t seed() const { return seed_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace flowrl
