#include "hydramix/masking/rng.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace hydramix {

std::uint64_t RngStream::mix(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

RngStream RngStream::split(std::string_view label) const {
  // FNV-1a over the label, then mixed with the parent seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return RngStream(mix(seed_ ^ mix(h)));
}

RngStream RngStream::split(std::uint64_t index) const {
  return RngStream(mix(seed_ ^ mix(index + 0x632BE59BD9B4E019ULL)));
}

std::size_t RngStream::below(std::size_t n) {
  if (n == 0) throw std::invalid_argument("RngStream::below(0)");
  // Rejection sampling keeps the draw exactly uniform.
  const std::uint64_t limit = max() - max() % n;
  std::uint64_t x;
  do {
    x = (*this)();
  } while (x >= limit);
  return static_cast<std::size_t>(x % n);
}

double RngStream::normal() { return std::normal_distribution<double>(0.0, 1.0)(*this); }

double RngStream::gamma(double shape) {
  if (!(shape > 0)) throw std::invalid_argument("gamma shape must be positive");
  return std::gamma_distribution<double>(shape, 1.0)(*this);
}

double RngStream::beta(double a, double b) {
  const double x = gamma(a);
  const double y = gamma(b);
  return x / (x + y);
}

std::vector<double> RngStream::dirichlet(std::size_t n, double alpha) {
  std::vector<double> w(n);
  double total = 0;
  for (auto& v : w) {
    v = gamma(alpha);
    total += v;
  }
  for (auto& v : w) v /= total;
  return w;
}

std::vector<std::size_t> RngStream::choose(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("choose: k > n");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

}  // namespace hydramix
