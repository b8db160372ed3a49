#include "hydramix/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace hydramix::numerics {

namespace detail {
thread_local std::uint64_t* branch_hash = nullptr;
}  // namespace detail

BranchTrace::BranchTrace() {
  if (detail::branch_hash) throw ContractError("BranchTrace: traces do not nest");
  detail::branch_hash = &hash_;
}

BranchTrace::~BranchTrace() { detail::branch_hash = nullptr; }

namespace {

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename T>
void require_rank(const Tensor<T>& a, std::size_t rank, const char* op) {
  if (a.rank() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                         ", got shape " + shape_str(a.shape()));
  }
}

template <typename T>
Tensor<T> finish(Tensor<T> out, const char* op) {
  debug_check_finite(out, op);
  return out;
}

}  // namespace

// Elementwise ------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "add");
  Tensor<T> out(a.shape());
  auto o = out.mutable_values();
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] + bv[i];
  if (needs_grad<T>({&a, &b})) {
    record_op<T>("add", {a, b}, out, [a, b, out]() mutable {
      auto g = out.grad();
      for (const Tensor<T>* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto tg = t->mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) tg[i] += g[i];
      }
    });
  }
  return finish(out, "add");
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "sub");
  Tensor<T> out(a.shape());
  auto o = out.mutable_values();
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] - bv[i];
  if (needs_grad<T>({&a, &b})) {
    record_op<T>("sub", {a, b}, out, [a, b, out]() mutable {
      auto g = out.grad();
      if (a.requires_grad()) {
        auto ag = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i];
      }
      if (b.requires_grad()) {
        auto bg = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) bg[i] -= g[i];
      }
    });
  }
  return finish(out, "sub");
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor<T> out(a.shape());
  auto o = out.mutable_values();
  auto av = a.values(), bv = b.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * bv[i];
  if (needs_grad<T>({&a, &b})) {
    record_op<T>("mul", {a, b}, out, [a, b, out]() mutable {
      auto g = out.grad();
      auto av = a.values(), bv = b.values();
      if (a.requires_grad()) {
        auto ag = a.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i] * bv[i];
      }
      if (b.requires_grad()) {
        auto bg = b.mutable_grad();
        for (std::size_t i = 0; i < g.size(); ++i) bg[i] += g[i] * av[i];
      }
    });
  }
  return finish(out, "mul");
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  Tensor<T> out(a.shape());
  auto o = out.mutable_values();
  auto av = a.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = av[i] * factor;
  if (needs_grad<T>({&a})) {
    record_op<T>("scale", {a}, out, [a, out, factor]() mutable {
      auto g = out.grad();
      auto ag = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i] * factor;
    });
  }
  return finish(out, "scale");
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
  T total = 0;
  for (T v : a.values()) total += v;
  Tensor<T> out = Tensor<T>::scalar(total);
  if (needs_grad<T>({&a})) {
    record_op<T>("sum", {a}, out, [a, out]() mutable {
      T g = out.grad()[0];
      for (T& v : a.mutable_grad()) v += g;
    });
  }
  return finish(out, "sum");
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
  return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  if (shape_numel(shape) != a.size()) {
    throw DimensionError("reshape: " + shape_str(a.shape()) + " -> " + shape_str(shape));
  }
  Tensor<T> out(std::move(shape), std::vector<T>(a.values().begin(), a.values().end()));
  if (needs_grad<T>({&a})) {
    record_op<T>("reshape", {a}, out, [a, out]() mutable {
      auto g = out.grad();
      auto ag = a.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) ag[i] += g[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> concat(std::span<const Tensor<T>> parts) {
  if (parts.empty()) throw ContractError("concat: no inputs");
  Shape shape = parts[0].shape();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.rank() != shape.size() || !std::equal(p.shape().begin() + 1, p.shape().end(),
                                                shape.begin() + 1)) {
      throw DimensionError("concat: trailing axes differ, " + shape_str(p.shape()) + " vs " +
                           shape_str(shape));
    }
    rows += p.dim(0);
  }
  shape[0] = rows;
  std::vector<T> values;
  values.reserve(shape_numel(shape));
  bool any_grad = false;
  for (const auto& p : parts) {
    values.insert(values.end(), p.values().begin(), p.values().end());
    any_grad = any_grad || p.requires_grad();
  }
  Tensor<T> out(std::move(shape), std::move(values));
  if (any_grad && active_tape<T>() != nullptr) {
    std::vector<Tensor<T>> inputs(parts.begin(), parts.end());
    record_op<T>("concat", inputs, out, [inputs, out]() mutable {
      auto g = out.grad();
      std::size_t offset = 0;
      for (auto& p : inputs) {
        if (p.requires_grad()) {
          auto pg = p.mutable_grad();
          for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += g[offset + i];
        }
        offset += p.size();
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t begin, std::size_t end) {
  if (begin >= end || end > a.dim(0)) {
    throw DimensionError("slice: rows [" + std::to_string(begin) + ", " + std::to_string(end) +
                         ") out of axis 0 extent " + std::to_string(a.dim(0)));
  }
  std::vector<std::size_t> rows;
  for (std::size_t r = begin; r < end; ++r) rows.push_back(r);
  return index_select(a, rows);
}

template <typename T>
Tensor<T> index_select(const Tensor<T>& a, std::span<const std::size_t> rows) {
  if (rows.empty()) throw ContractError("index_select: empty index list");
  const std::size_t row_size = a.size() / a.dim(0);
  Shape shape = a.shape();
  shape[0] = rows.size();
  std::vector<T> values(rows.size() * row_size);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] >= a.dim(0)) {
      throw DimensionError("index_select: row " + std::to_string(rows[r]) +
                           " out of axis 0 extent " + std::to_string(a.dim(0)));
    }
    std::copy_n(a.values().begin() + rows[r] * row_size, row_size,
                values.begin() + r * row_size);
  }
  Tensor<T> out(std::move(shape), std::move(values));
  if (needs_grad<T>({&a})) {
    std::vector<std::size_t> idx(rows.begin(), rows.end());
    record_op<T>("index_select", {a}, out, [a, out, idx, row_size]() mutable {
      auto g = out.grad();
      auto ag = a.mutable_grad();
      for (std::size_t r = 0; r < idx.size(); ++r) {
        for (std::size_t i = 0; i < row_size; ++i) ag[idx[r] * row_size + i] += g[r * row_size + i];
      }
    });
  }
  return out;
}

// Spatial ----------------------------------------------------------------------

template <typename T>
Tensor<T> instance_norm(const Tensor<T>& input, T eps) {
  require_rank(input, 4, "instance_norm");
  if (!(eps > 0)) throw ContractError("instance_norm: eps must be positive");
  const std::size_t slices = input.dim(0) * input.dim(1);
  const std::size_t hw = input.dim(2) * input.dim(3);
  Tensor<T> out(input.shape());
  std::vector<T> inv_std(slices);
  auto x = input.values();
  auto y = out.mutable_values();
  for (std::size_t s = 0; s < slices; ++s) {
    const T* xs = x.data() + s * hw;
    T mu = 0;
    for (std::size_t i = 0; i < hw; ++i) mu += xs[i];
    mu /= static_cast<T>(hw);
    T var = 0;
    for (std::size_t i = 0; i < hw; ++i) var += (xs[i] - mu) * (xs[i] - mu);
    var /= static_cast<T>(hw);
    inv_std[s] = T(1) / std::sqrt(var + eps);
    for (std::size_t i = 0; i < hw; ++i) y[s * hw + i] = (xs[i] - mu) * inv_std[s];
  }
  if (needs_grad<T>({&input})) {
    record_op<T>("instance_norm", {input}, out,
                 [input, out, inv_std = std::move(inv_std), slices, hw]() mutable {
                   auto g = out.grad();
                   auto xhat = out.values();
                   auto xg = input.mutable_grad();
                   const T n = static_cast<T>(hw);
                   for (std::size_t s = 0; s < slices; ++s) {
                     const std::size_t o = s * hw;
                     T g_mean = 0, gx_mean = 0;
                     for (std::size_t i = 0; i < hw; ++i) {
                       g_mean += g[o + i];
                       gx_mean += g[o + i] * xhat[o + i];
                     }
                     g_mean /= n;
                     gx_mean /= n;
                     for (std::size_t i = 0; i < hw; ++i) {
                       xg[o + i] += inv_std[s] * (g[o + i] - g_mean - xhat[o + i] * gx_mean);
                     }
                   }
                 });
  }
  return finish(out, "instance_norm");
}

template <typename T>
Tensor<T> pad_replicate(const Tensor<T>& input, int pad) {
  require_rank(input, 4, "pad_replicate");
  if (pad < 0) throw ContractError("pad_replicate: negative padding");
  const std::size_t p = static_cast<std::size_t>(pad);
  const std::size_t n = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = h + 2 * p, ow = w + 2 * p;
  Tensor<T> out({input.dim(0), input.dim(1), oh, ow});
  // Source index for every output pixel; reused by the backward scatter.
  std::vector<std::size_t> src(oh * ow);
  for (std::size_t y = 0; y < oh; ++y) {
    const std::size_t sy = static_cast<std::size_t>(
        std::clamp<long>(static_cast<long>(y) - pad, 0, static_cast<long>(h) - 1));
    for (std::size_t x = 0; x < ow; ++x) {
      const std::size_t sx = static_cast<std::size_t>(
          std::clamp<long>(static_cast<long>(x) - pad, 0, static_cast<long>(w) - 1));
      src[y * ow + x] = sy * w + sx;
    }
  }
  auto xv = input.values();
  auto yv = out.mutable_values();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t i = 0; i < oh * ow; ++i) yv[s * oh * ow + i] = xv[s * h * w + src[i]];
  }
  if (needs_grad<T>({&input})) {
    record_op<T>("pad_replicate", {input}, out, [input, out, src, n, h, w, oh, ow]() mutable {
      auto g = out.grad();
      auto xg = input.mutable_grad();
      for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t i = 0; i < oh * ow; ++i) xg[s * h * w + src[i]] += g[s * oh * ow + i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> crop(const Tensor<T>& input, std::size_t top, std::size_t left, std::size_t ch,
               std::size_t cw) {
  require_rank(input, 4, "crop");
  const std::size_t n = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  if (top + ch > h || left + cw > w || ch == 0 || cw == 0) {
    throw DimensionError("crop: window exceeds spatial extent " + shape_str(input.shape()));
  }
  Tensor<T> out({input.dim(0), input.dim(1), ch, cw});
  auto xv = input.values();
  auto yv = out.mutable_values();
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t y = 0; y < ch; ++y)
      for (std::size_t x = 0; x < cw; ++x)
        yv[(s * ch + y) * cw + x] = xv[(s * h + top + y) * w + left + x];
  if (needs_grad<T>({&input})) {
    record_op<T>("crop", {input}, out, [input, out, n, h, w, ch, cw, top, left]() mutable {
      auto g = out.grad();
      auto xg = input.mutable_grad();
      for (std::size_t s = 0; s < n; ++s)
        for (std::size_t y = 0; y < ch; ++y)
          for (std::size_t x = 0; x < cw; ++x)
            xg[(s * h + top + y) * w + left + x] += g[(s * ch + y) * cw + x];
    });
  }
  return out;
}

template <typename T>
Tensor<T> max_pool2d(const Tensor<T>& input, int window) {
  require_rank(input, 4, "max_pool2d");
  if (window < 1) throw ContractError("max_pool2d: window must be >= 1");
  const std::size_t k = static_cast<std::size_t>(window);
  const std::size_t n = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t oh = h / k, ow = w / k;
  if (oh == 0 || ow == 0) {
    throw DimensionError("max_pool2d: input " + shape_str(input.shape()) +
                         " smaller than window");
  }
  Tensor<T> out({input.dim(0), input.dim(1), oh, ow});
  std::vector<std::size_t> argmax(n * oh * ow);
  auto xv = input.values();
  auto yv = out.mutable_values();
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (s * h + y * k) * w + x * k;
        for (std::size_t dy = 0; dy < k; ++dy) {
          for (std::size_t dx = 0; dx < k; ++dx) {
            const std::size_t idx = (s * h + y * k + dy) * w + x * k + dx;
            if (xv[idx] > xv[best]) best = idx;
          }
        }
        const std::size_t o = (s * oh + y) * ow + x;
        argmax[o] = best;
        detail::trace_branch(best);
        yv[o] = xv[best];
      }
    }
  }
  if (needs_grad<T>({&input})) {
    record_op<T>("max_pool2d", {input}, out, [input, out, argmax = std::move(argmax)]() mutable {
      auto g = out.grad();
      auto xg = input.mutable_grad();
      for (std::size_t o = 0; o < g.size(); ++o) xg[argmax[o]] += g[o];
    });
  }
  return out;
}

template <typename T>
Tensor<T> horizontal_flip(const Tensor<T>& input) {
  require_rank(input, 4, "horizontal_flip");
  const std::size_t rows = input.dim(0) * input.dim(1) * input.dim(2), w = input.dim(3);
  Tensor<T> out(input.shape());
  auto xv = input.values();
  auto yv = out.mutable_values();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t x = 0; x < w; ++x) yv[r * w + x] = xv[r * w + (w - 1 - x)];
  if (needs_grad<T>({&input})) {
    record_op<T>("horizontal_flip", {input}, out, [input, out, rows, w]() mutable {
      auto g = out.grad();
      auto xg = input.mutable_grad();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t x = 0; x < w; ++x) xg[r * w + (w - 1 - x)] += g[r * w + x];
    });
  }
  return out;
}

namespace {

// One output coordinate of a 1-D resampling: two taps and their weights.
struct Tap {
  std::size_t lo, hi;
  double w_lo, w_hi;
};

std::vector<Tap> resample_taps(std::size_t in, std::size_t out, ResizeMode mode) {
  std::vector<Tap> taps(out);
  const double ratio = static_cast<double>(in) / static_cast<double>(out);
  for (std::size_t d = 0; d < out; ++d) {
    if (mode == ResizeMode::nearest) {
      const std::size_t s = d * in / out;
      taps[d] = {s, s, 1.0, 0.0};
      continue;
    }
    double src = (static_cast<double>(d) + 0.5) * ratio - 0.5;
    if (src < 0) src = 0;
    std::size_t lo = static_cast<std::size_t>(std::floor(src));
    if (lo > in - 1) lo = in - 1;
    const std::size_t hi = std::min(lo + 1, in - 1);
    const double frac = src - static_cast<double>(lo);
    taps[d] = {lo, hi, 1.0 - frac, frac};
  }
  return taps;
}

}  // namespace

template <typename T>
Tensor<T> resize(const Tensor<T>& input, std::size_t out_h, std::size_t out_w, ResizeMode mode) {
  require_rank(input, 4, "resize");
  if (out_h == 0 || out_w == 0) throw ContractError("resize: output extent must be >= 1");
  const std::size_t n = input.dim(0) * input.dim(1), h = input.dim(2), w = input.dim(3);
  const auto ty = resample_taps(h, out_h, mode);
  const auto tx = resample_taps(w, out_w, mode);
  Tensor<T> out({input.dim(0), input.dim(1), out_h, out_w});
  auto xv = input.values();
  auto yv = out.mutable_values();
  for (std::size_t s = 0; s < n; ++s) {
    const T* src = xv.data() + s * h * w;
    for (std::size_t y = 0; y < out_h; ++y) {
      for (std::size_t x = 0; x < out_w; ++x) {
        const Tap& a = ty[y];
        const Tap& b = tx[x];
        const double v = a.w_lo * (b.w_lo * src[a.lo * w + b.lo] + b.w_hi * src[a.lo * w + b.hi]) +
                         a.w_hi * (b.w_lo * src[a.hi * w + b.lo] + b.w_hi * src[a.hi * w + b.hi]);
        yv[(s * out_h + y) * out_w + x] = static_cast<T>(v);
      }
    }
  }
  if (needs_grad<T>({&input})) {
    record_op<T>("resize", {input}, out, [input, out, ty, tx, n, h, w, out_h, out_w]() mutable {
      auto g = out.grad();
      auto xg = input.mutable_grad();
      for (std::size_t s = 0; s < n; ++s) {
        T* dst = xg.data() + s * h * w;
        for (std::size_t y = 0; y < out_h; ++y) {
          for (std::size_t x = 0; x < out_w; ++x) {
            const double gv = g[(s * out_h + y) * out_w + x];
            const Tap& a = ty[y];
            const Tap& b = tx[x];
            dst[a.lo * w + b.lo] += static_cast<T>(gv * a.w_lo * b.w_lo);
            dst[a.lo * w + b.hi] += static_cast<T>(gv * a.w_lo * b.w_hi);
            dst[a.hi * w + b.lo] += static_cast<T>(gv * a.w_hi * b.w_lo);
            dst[a.hi * w + b.hi] += static_cast<T>(gv * a.w_hi * b.w_hi);
          }
        }
      }
    });
  }
  return finish(out, "resize");
}

// Dense ------------------------------------------------------------------------

template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias) {
  require_rank(input, 2, "linear");
  require_rank(weight, 2, "linear");
  const std::size_t n = input.dim(0), f = input.dim(1), o = weight.dim(0);
  if (weight.dim(1) != f) {
    throw DimensionError("linear: input features (axis 1) = " + std::to_string(f) +
                         " but weight axis 1 = " + std::to_string(weight.dim(1)));
  }
  if (bias.defined() && bias.size() != o) {
    throw DimensionError("linear: bias length " + std::to_string(bias.size()) + " != outputs " +
                         std::to_string(o));
  }
  Tensor<T> out({n, o});
  auto xv = input.values(), wv = weight.values();
  auto yv = out.mutable_values();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < o; ++j) {
      T acc = bias.defined() ? bias[j] : T(0);
      for (std::size_t k = 0; k < f; ++k) acc += xv[r * f + k] * wv[j * f + k];
      yv[r * o + j] = acc;
    }
  }
  if (needs_grad<T>({&input, &weight, &bias})) {
    std::vector<Tensor<T>> inputs{input, weight};
    if (bias.defined()) inputs.push_back(bias);
    record_op<T>("linear", inputs, out, [input, weight, bias, out, n, f, o]() mutable {
      auto g = out.grad();
      auto xv = input.values(), wv = weight.values();
      if (input.requires_grad()) {
        auto xg = input.mutable_grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < o; ++j)
            for (std::size_t k = 0; k < f; ++k) xg[r * f + k] += g[r * o + j] * wv[j * f + k];
      }
      if (weight.requires_grad()) {
        auto wg = weight.mutable_grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < o; ++j)
            for (std::size_t k = 0; k < f; ++k) wg[j * f + k] += g[r * o + j] * xv[r * f + k];
      }
      if (bias.defined() && bias.requires_grad()) {
        auto bg = bias.mutable_grad();
        for (std::size_t r = 0; r < n; ++r)
          for (std::size_t j = 0; j < o; ++j) bg[j] += g[r * o + j];
      }
    });
  }
  return finish(out, "linear");
}

// Activations ------------------------------------------------------------------

template <typename T>
Tensor<T> activation(const Tensor<T>& input, Activation act) {
  using Kind = Activation::Kind;
  if (act.kind == Kind::leaky_relu && !(act.slope > 0 && act.slope < 1)) {
    throw ContractError("leaky_relu slope must lie in (0, 1)");
  }
  const T slope = static_cast<T>(act.slope);
  Tensor<T> out(input.shape());
  auto x = input.values();
  auto y = out.mutable_values();
  const bool piecewise = act.kind == Kind::relu || act.kind == Kind::leaky_relu;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (piecewise) detail::trace_branch(x[i] > 0);
    switch (act.kind) {
      case Kind::relu: y[i] = x[i] > 0 ? x[i] : T(0); break;
      case Kind::leaky_relu: y[i] = x[i] > 0 ? x[i] : slope * x[i]; break;
      case Kind::sigmoid: y[i] = T(1) / (T(1) + std::exp(-x[i])); break;
      case Kind::tanh: y[i] = std::tanh(x[i]); break;
    }
  }
  if (needs_grad<T>({&input})) {
    record_op<T>("activation", {input}, out, [input, out, act, slope]() mutable {
      auto g = out.grad();
      auto x = input.values();
      auto y = out.values();
      auto xg = input.mutable_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        T d = 0;
        switch (act.kind) {
          case Kind::relu: d = x[i] > 0 ? T(1) : T(0); break;
          case Kind::leaky_relu: d = x[i] > 0 ? T(1) : slope; break;
          case Kind::sigmoid: d = y[i] * (T(1) - y[i]); break;
          case Kind::tanh: d = T(1) - y[i] * y[i]; break;
        }
        xg[i] += g[i] * d;
      }
    });
  }
  return finish(out, "activation");
}

// Losses -----------------------------------------------------------------------

template <typename T>
Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "mse_loss");
  auto d = sub(pred, target);
  return mean(mul(d, d));
}

template <typename T>
Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  require_same_shape(pred, target, "l1_loss");
  const std::size_t n = pred.size();
  auto p = pred.values(), t = target.values();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    total += std::abs(p[i] - t[i]);
    detail::trace_branch(p[i] > t[i] ? 2 : (p[i] < t[i] ? 1 : 0));
  }
  Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(n));
  if (needs_grad<T>({&pred, &target})) {
    record_op<T>("l1_loss", {pred, target}, out, [pred, target, out, n]() mutable {
      const T g = out.grad()[0] / static_cast<T>(n);
      auto p = pred.values(), t = target.values();
      for (std::size_t i = 0; i < n; ++i) {
        const T s = p[i] > t[i] ? T(1) : (p[i] < t[i] ? T(-1) : T(0));
        if (pred.requires_grad()) pred.mutable_grad()[i] += g * s;
        if (target.requires_grad()) target.mutable_grad()[i] -= g * s;
      }
    });
  }
  return finish(out, "l1_loss");
}

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& prob, const Tensor<T>& target) {
  require_same_shape(prob, target, "bce_loss");
  const std::size_t n = prob.size();
  const T lo = static_cast<T>(kBceClamp), hi = T(1) - static_cast<T>(kBceClamp);
  auto p = prob.values(), t = target.values();
  T total = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const T q = std::clamp(p[i], lo, hi);
    detail::trace_branch(p[i] < lo ? 1 : (p[i] > hi ? 2 : 0));
    total -= t[i] * std::log(q) + (T(1) - t[i]) * std::log(T(1) - q);
  }
  Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(n));
  if (needs_grad<T>({&prob})) {
    record_op<T>("bce_loss", {prob}, out, [prob, target, out, n, lo, hi]() mutable {
      const T g = out.grad()[0] / static_cast<T>(n);
      auto p = prob.values(), t = target.values();
      auto pg = prob.mutable_grad();
      for (std::size_t i = 0; i < n; ++i) {
        if (p[i] < lo || p[i] > hi) continue;
        pg[i] += g * (-t[i] / p[i] + (T(1) - t[i]) / (T(1) - p[i]));
      }
    });
  }
  return finish(out, "bce_loss");
}

template <typename T>
Tensor<T> softmax_rows(const Tensor<T>& logits) {
  require_rank(logits, 2, "softmax_rows");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor<T> out(logits.shape());
  auto x = logits.values();
  auto y = out.mutable_values();
  for (std::size_t r = 0; r < n; ++r) {
    T mx = x[r * k];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, x[r * k + j]);
    T z = 0;
    for (std::size_t j = 0; j < k; ++j) {
      y[r * k + j] = std::exp(x[r * k + j] - mx);
      z += y[r * k + j];
    }
    for (std::size_t j = 0; j < k; ++j) y[r * k + j] /= z;
  }
  return out;
}

template <typename T>
Tensor<T> soft_cross_entropy(const Tensor<T>& logits, const Tensor<T>& target) {
  require_rank(logits, 2, "soft_cross_entropy");
  require_same_shape(logits, target, "soft_cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor<T> probs = softmax_rows(logits);
  auto x = logits.values(), p = probs.values(), t = target.values();
  T total = 0;
  for (std::size_t r = 0; r < n; ++r) {
    T mx = x[r * k];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, x[r * k + j]);
    T z = 0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(x[r * k + j] - mx);
    const T log_z = mx + std::log(z);
    for (std::size_t j = 0; j < k; ++j) total -= t[r * k + j] * (x[r * k + j] - log_z);
  }
  Tensor<T> out = Tensor<T>::scalar(total / static_cast<T>(n));
  if (needs_grad<T>({&logits})) {
    record_op<T>("soft_cross_entropy", {logits}, out, [logits, target, probs, out, n, k]() mutable {
      const T g = out.grad()[0] / static_cast<T>(n);
      auto p = probs.values(), t = target.values();
      auto xg = logits.mutable_grad();
      for (std::size_t r = 0; r < n; ++r) {
        T mass = 0;
        for (std::size_t j = 0; j < k; ++j) mass += t[r * k + j];
        for (std::size_t j = 0; j < k; ++j) xg[r * k + j] += g * (mass * p[r * k + j] - t[r * k + j]);
      }
    });
  }
  return finish(out, "soft_cross_entropy");
}

template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_cross_entropy");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows (axis 0)");
  }
  Tensor<T> onehot({n, k});
  auto ov = onehot.mutable_values();
  for (std::size_t r = 0; r < n; ++r) {
    if (labels[r] < 0 || static_cast<std::size_t>(labels[r]) >= k) {
      throw ContractError("softmax_cross_entropy: label " + std::to_string(labels[r]) +
                          " outside [0, " + std::to_string(k) + ")");
    }
    ov[r * k + static_cast<std::size_t>(labels[r])] = T(1);
  }
  return soft_cross_entropy(logits, onehot);
}

template <typename T>
Tensor<T> reduce_loss(const Tensor<T>& pred, const Tensor<T>& target, LossKind kind) {
  switch (kind) {
    case LossKind::mse: return mse_loss(pred, target);
    case LossKind::l1: return l1_loss(pred, target);
    case LossKind::bce: return bce_loss(pred, target);
    case LossKind::softmax_cross_entropy: {
      std::vector<int> labels;
      labels.reserve(target.size());
      for (T v : target.values()) labels.push_back(static_cast<int>(std::lround(v)));
      return softmax_cross_entropy(pred, std::span<const int>(labels));
    }
  }
  throw ContractError("reduce_loss: unknown kind");
}

#define HM_INSTANTIATE(T)                                                                   \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> scale(const Tensor<T>&, T);                                            \
  template Tensor<T> sum(const Tensor<T>&);                                                 \
  template Tensor<T> mean(const Tensor<T>&);                                                \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                      \
  template Tensor<T> concat(std::span<const Tensor<T>>);                                    \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t);                     \
  template Tensor<T> index_select(const Tensor<T>&, std::span<const std::size_t>);          \
  template Tensor<T> instance_norm(const Tensor<T>&, T);                                    \
  template Tensor<T> pad_replicate(const Tensor<T>&, int);                                  \
  template Tensor<T> crop(const Tensor<T>&, std::size_t, std::size_t, std::size_t,          \
                          std::size_t);                                                     \
  template Tensor<T> max_pool2d(const Tensor<T>&, int);                                     \
  template Tensor<T> horizontal_flip(const Tensor<T>&);                                     \
  template Tensor<T> resize(const Tensor<T>&, std::size_t, std::size_t, ResizeMode);        \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> activation(const Tensor<T>&, Activation);                              \
  template Tensor<T> mse_loss(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> l1_loss(const Tensor<T>&, const Tensor<T>&);                           \
  template Tensor<T> bce_loss(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> softmax_rows(const Tensor<T>&);                                        \
  template Tensor<T> soft_cross_entropy(const Tensor<T>&, const Tensor<T>&);                \
  template Tensor<T> softmax_cross_entropy(const Tensor<T>&, std::span<const int>);         \
  template Tensor<T> reduce_loss(const Tensor<T>&, const Tensor<T>&, LossKind);

HM_INSTANTIATE(float)
HM_INSTANTIATE(double)
#undef HM_INSTANTIATE

}  // namespace hydramix::numerics
