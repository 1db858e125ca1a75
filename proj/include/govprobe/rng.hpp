#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace govprobe {

/// Seeded generator used for every random decision in the toolkit.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are not portable across library
/// implementations, so every derived quantity (bounded integers, unit reals,
/// normals, shuffles) is computed here from raw 64-bit draws:
///
///  - uniform_index(n): rejection sampling on the top of the 64-bit range
///  - uniform01(): (draw >> 11) * 2^-53, in [0, 1)
///  - normal(): Box-Muller using two uniform01() draws, no caching
///  - shuffle(): Fisher-Yates from the last position down
///
/// Child seeds come from derive_seed(), a SplitMix64 fold over the tags.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  double normal(double mean = 0.0, double stddev = 1.0);

  template <class T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <class T>
  void shuffle(std::vector<T>& items) {
    shuffle(std::span<T>(items));
  }

  /// k distinct indices drawn uniformly from [0, n), returned in ascending order.
  std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

}  // namespace govprobe
