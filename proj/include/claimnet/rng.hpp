#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace claimnet {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seeded random stream. Every stochastic operation in the library draws from
/// an explicit RngStream, so runs are reproducible from the seed alone.
/// Copyable: a copy continues from the same state as the original.
class RngStream {
public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal(double mean = 0.0, double sd = 1.0) {
    std::normal_distribution<double> d(mean, sd);
    return d(gen_);
  }

  double gamma(double shape, double scale) {
    std::gamma_distribution<double> d(shape, scale);
    return d(gen_);
  }

  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(next_u64() % n);
  }

  /// Fisher-Yates; hand-rolled so the permutation depends only on the stream.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Independent substream; (seed, salt) pairs map to distinct streams.
  RngStream derive(std::uint64_t salt) const {
    return RngStream(splitmix64(seed_ ^ splitmix64(salt + 0x51ed2701ULL)));
  }

private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
};

}  // namespace claimnet
