#pragma once

// Randomness with a fully specified output sequence, so seeded results are
// identical across standard libraries.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

namespace maskpipe {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Uniform integer in [0, n) by rejection; n > 0.
template <typename Engine>
std::uint64_t uniform_below(Engine& engine, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = static_cast<std::uint64_t>(engine());
  } while (v >= limit);
  return v % n;
}

/// Uniform double in [0, 1) from the top 53 bits.
template <typename Engine>
double uniform_unit(Engine& engine) {
  return static_cast<double>(static_cast<std::uint64_t>(engine()) >> 11) * 0x1.0p-53;
}

/// In-place Fisher-Yates shuffle.
template <typename T, typename Engine>
void shuffle(std::vector<T>& items, Engine& engine) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::swap(items[i - 1], items[uniform_below(engine, i)]);
  }
}

/// k distinct indices out of [0, n), uniformly, returned in ascending order.
template <typename Engine>
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Engine& engine) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  k = std::min(k, n);
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(idx[i], idx[i + uniform_below(engine, n - i)]);
  }
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

/// Counter-based generator: the value stream is a pure function of
/// (seed, key), so draws for item `key` do not depend on how many other
/// items were processed before it.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  CounterRng(std::uint64_t seed, std::uint64_t key)
      : base_(splitmix64(splitmix64(seed) ^ (key * 0xD1B54A32D192ED03ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return UINT64_MAX; }

  result_type operator()() { return splitmix64(base_ + 0x9E3779B97F4A7C15ULL * counter_++); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_unit(*this); }
  bool bernoulli(double p) { return uniform_unit(*this) < p; }

 private:
  std::uint64_t base_;
  std::uint64_t counter_ = 0;
};

}  // namespace maskpipe
