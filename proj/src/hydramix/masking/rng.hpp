#pragma once

#include <cstdint>
#include <limits>
#include <string_view>
#include <vector>

namespace hydramix {

/// Counter-based deterministic random stream (SplitMix64 over seed + counter).
///
/// Satisfies UniformRandomBitGenerator, so it can drive std distributions.
/// split(label) derives an independent child stream; the label set used by
/// the pipeline is documented in the README ("Seeds").
class RngStream {
 public:
  using result_type = std::uint64_t;

  explicit RngStream(std::uint64_t seed = 0) : seed_(seed) {}
  /// Stream positioned after `counter` draws, for resuming saved state.
  RngStream(std::uint64_t seed, std::uint64_t counter) : seed_(seed), counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(seed_ + 0x9E3779B97F4A7C15ULL * ++counter_); }

  RngStream split(std::string_view label) const;
  RngStream split(std::uint64_t index) const;

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }
  bool bernoulli(double p) { return uniform() < p; }
  /// Uniform integer in [0, n); n must be positive.
  std::size_t below(std::size_t n);
  double normal();
  double gamma(double shape);
  double beta(double a, double b);
  std::vector<double> dirichlet(std::size_t n, double alpha);
  /// k distinct indices from [0, n) in draw order (partial Fisher-Yates).
  std::vector<std::size_t> choose(std::size_t n, std::size_t k);
  std::vector<std::size_t> permutation(std::size_t n) { return choose(n, n); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

}  // namespace hydramix
