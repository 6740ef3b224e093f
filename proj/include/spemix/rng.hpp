#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "spemix/error.hpp"

namespace spemix {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Stream id for one fit (or one replicate) inside a batch: hashes the base
// seed together with grid coordinates so concurrent fits never share a
// stream and the mapping is stable across thread schedules.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = base;
  std::uint64_t h = splitmix64_next(s);
  s ^= a + 0x9e3779b97f4a7c15ull;
  h ^= splitmix64_next(s);
  s ^= b + 0xbf58476d1ce4e5b9ull;
  h ^= splitmix64_next(s);
  s ^= c + 0x94d049bb133111ebull;
  h ^= splitmix64_next(s);
  return h;
}

// Deterministic generator: the mt19937_64 engine is bit-exact by the
// standard, but the std:: distributions are not, so every transform from
// raw bits to variates is spelled out here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on [0, 1): top 53 bits of the engine output.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1], safe as a log() argument.
  double uniform_pos() { return 1.0 - uniform(); }

  // Standard normal via Box-Muller, caching the second variate.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = uniform_pos();
    double v = uniform();
    double r = std::sqrt(-2.0 * std::log(u));
    double angle = 2.0 * pi_ * v;
    spare_ = r * std::sin(angle);
    has_spare_ = true;
    return r * std::cos(angle);
  }

  // Marsaglia-Tsang squeeze for shape >= 1, boosted for shape < 1.
  double gamma(double shape, double scale) {
    if (!(shape > 0.0) || !(scale > 0.0))
      throw ValidationError("gamma: shape and scale must be positive");
    if (shape < 1.0) {
      double u = uniform_pos();
      return gamma(shape + 1.0, scale) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      double u = uniform_pos();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
      if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
        return d * v * scale;
    }
  }

  // Index draw proportional to nonnegative weights.
  int categorical(const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) {
      if (w < 0.0) throw ValidationError("categorical: negative weight");
      total += w;
    }
    if (!(total > 0.0)) throw ValidationError("categorical: zero total weight");
    double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

  // Integer uniform on [0, n).
  int below(int n) {
    if (n <= 0) throw ValidationError("below: n must be positive");
    return static_cast<int>(uniform_idx_(n));
  }

  // k distinct indices from [0, n) via partial Fisher-Yates.
  std::vector<int> sample_indices(int n, int k) {
    if (k < 0 || k > n) throw ValidationError("sample_indices: need 0 <= k <= n");
    std::vector<int> pool(n);
    for (int i = 0; i < n; ++i) pool[i] = i;
    for (int i = 0; i < k; ++i) {
      int j = i + static_cast<int>(uniform_idx_(n - i));
      std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
  }

  // In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (int i = static_cast<int>(items.size()) - 1; i > 0; --i) {
      int j = static_cast<int>(uniform_idx_(i + 1));
      std::swap(items[i], items[j]);
    }
  }

 private:
  // Unbiased-enough index draw for desk-scale n (double has 53 uniform bits).
  std::uint64_t uniform_idx_(int n) {
    return static_cast<std::uint64_t>(uniform() * n) % static_cast<std::uint64_t>(n);
  }

  static constexpr double pi_ = 3.14159265358979323846;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace spemix
