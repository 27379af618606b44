#ifndef DRIFTSCAPE_RNG_HPP
#define DRIFTSCAPE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

#include "driftscape/types.hpp"

namespace driftscape {

/// splitmix64 finalizer, used both to key substreams and to warm up seeds.
constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Derives a substream seed from a base seed and a list of stream ids.
/// Order-sensitive, so (seed, a, b) and (seed, b, a) are distinct streams.
constexpr std::uint64_t mix_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> ids) {
  std::uint64_t s = splitmix64(seed);
  for (std::uint64_t id : ids) {
    s = splitmix64(s ^ splitmix64(id + 0xd1b54a32d192ed03ull));
  }
  return s;
}

/// Seeded random source with the distributions this library needs.
/// All draws are implemented in-house on top of mt19937_64 so that results
/// are bit-reproducible across platforms and standard-library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(splitmix64(seed)) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  /// Standard normal via Box-Muller; second draw of each pair is cached.
  double gauss() {
    if (have_cached_) {
      have_cached_ = false;
      return cached_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double t = 2.0 * std::numbers::pi * uniform();
    cached_ = r * std::sin(t);
    have_cached_ = true;
    return r * std::cos(t);
  }

  Vec2 gauss2() {
    const double a = gauss();
    const double b = gauss();
    return Vec2(a, b);
  }

  /// Poisson draw by the product method; large means are split into
  /// chunks of 30 so the exp(-lambda) threshold never underflows.
  long poisson(double lambda) {
    long total = 0;
    while (lambda > 30.0) {
      total += poisson_product(30.0);
      lambda -= 30.0;
    }
    return total + poisson_product(lambda);
  }

 private:
  long poisson_product(double lambda) {
    if (lambda <= 0.0) return 0;
    const double threshold = std::exp(-lambda);
    long k = 0;
    double p = uniform();
    while (p > threshold) {
      ++k;
      p *= uniform();
    }
    return k;
  }

  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

}  // namespace driftscape

#endif
