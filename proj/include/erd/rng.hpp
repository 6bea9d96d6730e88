#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace erd {

/// splitmix64 step. Used for seeding and for deriving independent streams.
std::uint64_t splitmix64(std::uint64_t& state);

/// Mixes a parent seed with a stream label into a child seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// xoshiro256** generator seeded through splitmix64.
///
/// Every derived quantity (bounded integers, uniforms, normals, shuffles) is
/// defined in terms of next() so that draws are reproducible from the seed
/// alone:
///   - uniform():   (next() >> 11) * 2^-53, in [0, 1)
///   - below(n):    rejection of values under (2^64 - n) mod n, then mod n
///   - normal():    Box-Muller on (1 - uniform(), uniform()); the sine branch
///                  is cached and returned by the following call
///   - shuffle():   Fisher-Yates from the last position down
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next();
  double uniform();
  std::uint64_t below(std::uint64_t n);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  /// Independent generator for a labelled sub-stream.
  Rng split(std::uint64_t stream) const;

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

  template <typename T>
  void shuffle(std::vector<T>& values) {
    shuffle(std::span<T>(values));
  }

  /// k distinct indices from [0, n) in draw order (partial Fisher-Yates).
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k);

 private:
  std::uint64_t s_[4];
  std::uint64_t seed_;
  bool has_cached_normal_ = false;
  double cached_normal_ = 0.0;
};

}  // namespace erd
