#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace rfm {

// SplitMix64 finaliser; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t x) noexcept;

// Derives a child seed from a parent seed and a tag. Equal inputs always give
// equal outputs, on every platform.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag) noexcept;
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag) noexcept;

// Seeded random stream. The standard library distributions are
// implementation-defined, so all draws here are built directly from the
// 64-bit engine output to keep results bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer on [0, n). n must be positive.
  std::size_t index(std::size_t n);

  bool bernoulli(double p) { return uniform() < p; }

  // Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  // Draws an index according to non-negative weights (need not be normalised).
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

}  // namespace rfm
