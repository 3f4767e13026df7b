#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

namespace inrteach {

/// xoshiro256++ seeded through splitmix64. The stream depends only on the
/// seed, never on the platform's <random> implementation.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type next();
  result_type operator()() { return next(); }

  /// Uniform in [0, 1) with 53 random bits.
  double canonical();
  /// Uniform in [lo, hi); requires lo < hi.
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller on two uniform draws.
  double normal();
  /// Zero-mean Laplace sample with the given scale b (variance 2 b^2).
  double laplace(double scale);
  /// Uniform integer in [0, n).
  std::size_t index(std::size_t n);
  /// Fisher-Yates shuffle.
  void shuffle(std::span<std::size_t> values);

 private:
  std::array<std::uint64_t, 4> state_;
};

}  // namespace inrteach
