#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace tailkit {

// Deterministic random stream.  All distribution inverses are implemented
// here rather than through std:: distributions, so draws are reproducible
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform on (0,1), never exactly 0 or 1.
  double uniform() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1p-53;
  }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

  double normal() {
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // Number of trials to first success, support {1,2,...}.
  std::uint64_t geometric(double p) {
    if (!(p > 0.0 && p <= 1.0)) throw std::invalid_argument("geometric: p in (0,1]");
    if (p == 1.0) return 1;
    const double g = std::floor(std::log(uniform()) / std::log1p(-p));
    return 1 + static_cast<std::uint64_t>(g);
  }

  // Index uniform on {0,...,n-1}.
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("index: n must be positive");
    std::size_t i = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return i >= n ? n - 1 : i;
  }

  // Marsaglia-Tsang; valid for any shape > 0.
  double gamma(double shape, double scale = 1.0) {
    if (!(shape > 0.0) || !(scale > 0.0)) throw std::invalid_argument("gamma: shape,scale > 0");
    if (shape < 1.0) {
      const double u = uniform();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x = normal();
      double v = 1.0 + c * x;
      if (v <= 0.0) continue;
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v * scale;
    }
  }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

  std::uint64_t raw() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace tailkit
