#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <vector>

#include "hydramix/numerics/tensor.hpp"

namespace oracle {

using hydramix::numerics::Tensor;

// Cross-correlation with zero padding written as six nested sums.
inline Tensor<double> conv_oracle(const Tensor<double>& x, const Tensor<double>& w, int stride, int pad) {
  const long n = x.dim(0), ci = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const long co = w.dim(0), k = w.dim(2);
  const long oh = (h + 2 * pad - k) / stride + 1, ow = (wd + 2 * pad - k) / stride + 1;
  Tensor<double> out({std::size_t(n), std::size_t(co), std::size_t(oh), std::size_t(ow)});
  auto o = out.mutable_values();
  for (long b = 0; b < n; ++b)
    for (long c = 0; c < co; ++c)
      for (long y = 0; y < oh; ++y)
        for (long xx = 0; xx < ow; ++xx) {
          double acc = 0;
          for (long i = 0; i < ci; ++i)
            for (long u = 0; u < k; ++u)
              for (long v = 0; v < k; ++v) {
                const long sy = y * stride + u - pad, sx = xx * stride + v - pad;
                if (sy < 0 || sx < 0 || sy >= h || sx >= wd) continue;
                acc += x[((b * ci + i) * h + sy) * wd + sx] * w[((c * ci + i) * k + u) * k + v];
              }
          o[((b * co + c) * oh + y) * ow + xx] = acc;
        }
  return out;
}

// Reference segmentation kept deliberately plain: a component id per pixel
// that is rewritten wholesale on every merge, Int(C) stored as the largest
// edge weight accepted into C, and a 2-D Gaussian applied by direct summation.
struct Reference {
  std::size_t h, w, c;
  std::vector<double> img;  // C x H x W

  static long mirror(long i, long n) {
    if (n == 1) return 0;
    while (i < 0 || i >= n) i = i < 0 ? -i : 2 * (n - 1) - i;
    return i;
  }

  std::vector<double> smoothed(double sigma) const {
    if (sigma == 0) return img;
    const long r = static_cast<long>(std::ceil(3 * sigma));
    std::vector<double> g1(2 * r + 1);
    double norm = 0;
    for (long i = -r; i <= r; ++i) norm += g1[i + r] = std::exp(-double(i * i) / (2 * sigma * sigma));
    for (auto& v : g1) v /= norm;
    std::vector<double> out(img.size());
    for (std::size_t ch = 0; ch < c; ++ch)
      for (long y = 0; y < long(h); ++y)
        for (long x = 0; x < long(w); ++x) {
          double acc = 0;
          for (long dy = -r; dy <= r; ++dy)
            for (long dx = -r; dx <= r; ++dx)
              acc += g1[dy + r] * g1[dx + r] *
                     img[ch * h * w + mirror(y + dy, h) * w + mirror(x + dx, w)];
          out[ch * h * w + y * w + x] = acc;
        }
    return out;
  }

  std::vector<std::uint32_t> run(double k, double sigma, std::size_t min_size) const {
    const auto s = smoothed(sigma);
    const std::size_t n = h * w;
    struct E {
      double wgt;
      std::size_t a, b, order;
    };
    std::vector<E> edges;
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x) {
        const std::size_t p = y * w + x;
        for (std::size_t q : {x + 1 < w ? p + 1 : n, y + 1 < h ? p + w : n}) {
          if (q == n) continue;
          double d2 = 0;
          for (std::size_t ch = 0; ch < c; ++ch) {
            const double d = 255.0 * (s[ch * n + p] - s[ch * n + q]);
            d2 += d * d;
          }
          edges.push_back({std::sqrt(d2), p, q, edges.size()});
        }
      }
    std::sort(edges.begin(), edges.end(),
              [](const E& l, const E& r) { return l.wgt != r.wgt ? l.wgt < r.wgt : l.order < r.order; });

    std::vector<std::size_t> comp(n);
    std::iota(comp.begin(), comp.end(), 0);
    std::vector<double> internal(n, 0.0);
    auto size_of = [&](std::size_t id) { return std::size_t(std::count(comp.begin(), comp.end(), id)); };
    auto merge = [&](std::size_t into, std::size_t from) {
      for (auto& v : comp)
        if (v == from) v = into;
    };
    for (const E& e : edges) {
      const std::size_t a = comp[e.a], b = comp[e.b];
      if (a == b) continue;
      const double mint = std::min(internal[a] + k / double(size_of(a)), internal[b] + k / double(size_of(b)));
      if (e.wgt <= mint) {
        merge(a, b);
        internal[a] = e.wgt;
      }
    }
    for (const E& e : edges) {
      const std::size_t a = comp[e.a], b = comp[e.b];
      if (a != b && (size_of(a) < min_size || size_of(b) < min_size)) merge(a, b);
    }
    return {comp.begin(), comp.end()};
  }
};

// Canonical form of a partition: labels renumbered by first appearance.
inline std::vector<std::uint32_t> canonical(const std::vector<std::uint32_t>& raw) {
  std::map<std::uint32_t, std::uint32_t> m;
  std::vector<std::uint32_t> out;
  for (auto v : raw) out.push_back(m.try_emplace(v, std::uint32_t(m.size())).first->second);
  return out;
}

inline constexpr double k1[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};

inline long clampi(long i, long n) { return std::min(std::max(i, 0L), n - 1); }

// Single-plane pyramid steps written directly from their definitions.
inline std::vector<double> down_oracle(const std::vector<double>& x, long h, long w, long& oh, long& ow) {
  oh = (h + 1) / 2;
  ow = (w + 1) / 2;
  std::vector<double> out(oh * ow);
  for (long i = 0; i < oh; ++i)
    for (long j = 0; j < ow; ++j) {
      double acc = 0;
      for (long a = -2; a <= 2; ++a)
        for (long b = -2; b <= 2; ++b) acc += k1[a + 2] * k1[b + 2] * x[clampi(2 * i + a, h) * w + clampi(2 * j + b, w)];
      out[i * ow + j] = acc;
    }
  return out;
}

// Zero-insertion upsampling with replicated border samples, filtered by
// 4 x the 2-D binomial kernel.
inline std::vector<double> up_oracle(const std::vector<double>& x, long h, long w, long oh, long ow) {
  auto z = [&](long p, long q) -> double {
    if (p % 2 != 0 || q % 2 != 0) return 0.0;
    return x[clampi(p / 2, h) * w + clampi(q / 2, w)];
  };
  std::vector<double> out(oh * ow);
  for (long u = 0; u < oh; ++u)
    for (long v = 0; v < ow; ++v) {
      double acc = 0;
      for (long a = -2; a <= 2; ++a)
        for (long b = -2; b <= 2; ++b) acc += 4 * k1[a + 2] * k1[b + 2] * z(u + a, v + b);
      out[u * ow + v] = acc;
    }
  return out;
}

}  // namespace oracle
