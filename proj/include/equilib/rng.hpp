#pragma once

#include <cstdint>
#include <vector>

namespace equilib {

// Identifier recorded in generated artifacts so runs can be traced back to
// the exact generator.
inline constexpr const char* kRngAlgorithm = "splitmix64";

// splitmix64 (Steele, Lea & Flood, "Fast splittable pseudorandom number
// generators", OOPSLA 2014). Counter-based: the state advances by a fixed
// odd constant and the output is a bijective hash of the counter, so
// substreams can be derived by jumping the counter.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Unbiased integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x = next();
    while (x >= limit) x = next();
    return x % n;
  }

  // Independent substream; deterministic function of the current state.
  SplitMix64 split() { return SplitMix64(next()); }

 private:
  std::uint64_t state_;
};

// Deterministic, index-addressable substream derivation so parallel sample
// generation can partition the counter space without coordination.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) {
  SplitMix64 s(seed ^ (0xbf58476d1ce4e5b9ULL * (index + 1)));
  return s.next();
}

// Seeded Fisher-Yates shuffle (used for minibatch order and random
// permutations; kept here so every consumer shuffles identically).
template <typename T>
void shuffle_in_place(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace equilib
