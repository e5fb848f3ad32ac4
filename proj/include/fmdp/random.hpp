#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <span>

namespace fmdp {

/// Seeded generator with platform-independent uniform draws. Copy it to clone the stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  /// Uniform double in [0, 1) built from the top 53 bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    // rejection sampling keeps the draw exactly uniform
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x = engine_();
    while (x >= limit) x = engine_();
    return x % bound;
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Index drawn from a probability vector; falls back to the last index on round-off.
  std::size_t categorical(std::span<const double> probs) {
    double u = uniform();
    for (std::size_t k = 0; k < probs.size(); ++k) {
      if (u < probs[k]) return k;
      u -= probs[k];
    }
    for (std::size_t k = probs.size(); k-- > 0;)
      if (probs[k] > 0.0) return k;
    return probs.size() - 1;
  }

  /// Gamma(shape, 1) via Marsaglia-Tsang.
  double gamma(double shape);

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

inline double Rng::gamma(double shape) {
  if (shape < 1.0) {
    const double u = uniform();
    return gamma(shape + 1.0) * std::pow(u > 0.0 ? u : 0x1.0p-53, 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      // Box-Muller normal
      const double u1 = uniform(), u2 = uniform();
      x = std::sqrt(-2.0 * std::log(u1 > 0.0 ? u1 : 0x1.0p-53)) * std::cos(6.283185307179586 * u2);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u > 0.0 ? u : 0x1.0p-53) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

}  // namespace fmdp
