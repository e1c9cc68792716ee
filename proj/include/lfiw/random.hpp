#pragma once

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lfiw::rng {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives the seed for a named purpose stream from a root seed. Streams are
/// independent of each other and of the order in which they are requested, so
/// adding a new consumer never perturbs existing ones.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose,
                                 std::uint64_t index = 0) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the purpose label
  for (char c : purpose) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  std::uint64_t state = root;
  splitmix64(state);
  state ^= h;
  splitmix64(state);
  state ^= index * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL;
  return splitmix64(state);
}

/// Deterministic random stream. All distribution transforms are implemented
/// here rather than taken from <random>, whose distributions are not
/// bit-reproducible across standard library versions.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t raw() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; the spare value is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Unbiased integer in [0, n).
  std::uint64_t integer(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::integer: n must be positive");
    const std::uint64_t bound = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = gen_();
    while (x >= bound) x = gen_();
    return x % n;
  }

  /// Index drawn proportionally to the given non-negative weights.
  std::size_t categorical(std::span<const double> weights) {
    return categorical_indexed(weights.size(),
                               [&](std::size_t i) { return weights[i]; });
  }

  /// Categorical over any indexable weight view (e.g. an Eigen matrix row,
  /// which is not memory-contiguous).
  template <class WeightAt>
  std::size_t categorical_indexed(std::size_t n, WeightAt&& weight_at) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double w = weight_at(i);
      if (w < 0.0 || !std::isfinite(w))
        throw std::invalid_argument("Rng::categorical: weights must be finite and >= 0");
      total += w;
    }
    if (total <= 0.0)
      throw std::runtime_error("Rng::categorical: all weights are zero");
    const double u = uniform() * total;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      acc += weight_at(i);
      if (u < acc) return i;
    }
    return n - 1;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(integer(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  std::vector<std::size_t> permutation(std::size_t n) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    shuffle(idx);
    return idx;
  }

 private:
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace lfiw::rng
