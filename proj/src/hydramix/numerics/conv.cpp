// Direct convolution via patch-matrix lowering. Accumulation order is fixed, so
// results are reproducible bit for bit.

#include <string>

#include "hydramix/numerics/ops.hpp"

namespace hydramix::numerics {

namespace {

struct Geometry {
  std::size_t channels, h, w;  // image side of the lowering
  std::size_t k, stride, pad;
  std::size_t oh, ow;          // patch grid

  std::size_t rows() const { return channels * k * k; }
  std::size_t cols() const { return oh * ow; }
};

template <typename T>
void im2col(const T* img, const Geometry& g, T* cols) {
  const std::size_t n_cols = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = cols + ((c * g.k + ky) * g.k + kx) * n_cols;
        for (std::size_t y = 0; y < g.oh; ++y) {
          const long iy = static_cast<long>(y * g.stride + ky) - static_cast<long>(g.pad);
          for (std::size_t x = 0; x < g.ow; ++x) {
            const long ix = static_cast<long>(x * g.stride + kx) - static_cast<long>(g.pad);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.h) &&
                                ix < static_cast<long>(g.w);
            row[y * g.ow + x] =
                inside ? img[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)]
                       : T(0);
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const T* cols, const Geometry& g, T* img) {
  const std::size_t n_cols = g.cols();
  for (std::size_t c = 0; c < g.channels; ++c) {
    for (std::size_t ky = 0; ky < g.k; ++ky) {
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = cols + ((c * g.k + ky) * g.k + kx) * n_cols;
        for (std::size_t y = 0; y < g.oh; ++y) {
          const long iy = static_cast<long>(y * g.stride + ky) - static_cast<long>(g.pad);
          if (iy < 0 || iy >= static_cast<long>(g.h)) continue;
          for (std::size_t x = 0; x < g.ow; ++x) {
            const long ix = static_cast<long>(x * g.stride + kx) - static_cast<long>(g.pad);
            if (ix < 0 || ix >= static_cast<long>(g.w)) continue;
            img[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] +=
                row[y * g.ow + x];
          }
        }
      }
    }
  }
}

// out[o][p] += sum_j a[o][j] * b[j][p]
template <typename T>
void matmul_add(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t o = 0; o < m; ++o) {
    T* dst = out + o * n;
    for (std::size_t j = 0; j < k; ++j) {
      const T s = a[o * k + j];
      if (s == T(0)) continue;
      const T* src = b + j * n;
      for (std::size_t p = 0; p < n; ++p) dst[p] += s * src[p];
    }
  }
}

// out[j][p] += sum_o a[o][j] * b[o][p]   (a is m x k, b is m x n)
template <typename T>
void matmul_tn_add(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t o = 0; o < m; ++o) {
    const T* src = b + o * n;
    for (std::size_t j = 0; j < k; ++j) {
      const T s = a[o * k + j];
      if (s == T(0)) continue;
      T* dst = out + j * n;
      for (std::size_t p = 0; p < n; ++p) dst[p] += s * src[p];
    }
  }
}

// out[o][j] += sum_p a[o][p] * b[j][p]
template <typename T>
void matmul_nt_add(const T* a, const T* b, T* out, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t o = 0; o < m; ++o) {
    const T* ar = a + o * n;
    for (std::size_t j = 0; j < k; ++j) {
      const T* br = b + j * n;
      T acc = 0;
      for (std::size_t p = 0; p < n; ++p) acc += ar[p] * br[p];
      out[o * k + j] += acc;
    }
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw DimensionError(msg);
}

template <typename T>
void check_conv_args(const char* op, const Tensor<T>& input, const Tensor<T>& weight,
                     const Tensor<T>& bias, std::size_t in_axis, std::size_t out_axis,
                     int stride, int padding) {
  const std::string name(op);
  require(input.rank() == 4, name + ": input must be NCHW, got " + shape_str(input.shape()));
  require(weight.rank() == 4, name + ": weight must be rank 4, got " + shape_str(weight.shape()));
  require(weight.dim(2) == weight.dim(3),
          name + ": kernel must be square (weight axes 2,3 = " + shape_str(weight.shape()) + ")");
  require(input.dim(1) == weight.dim(in_axis),
          name + ": input channels (input axis 1 = " + std::to_string(input.dim(1)) +
              ") != weight axis " + std::to_string(in_axis) + " (" +
              std::to_string(weight.dim(in_axis)) + ")");
  if (bias.defined()) {
    require(bias.size() == weight.dim(out_axis),
            name + ": bias length " + std::to_string(bias.size()) + " != weight axis " +
                std::to_string(out_axis) + " (" + std::to_string(weight.dim(out_axis)) + ")");
  }
  if (stride < 1) throw ContractError(name + ": stride must be >= 1");
  if (padding < 0) throw ContractError(name + ": padding must be >= 0");
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride, int padding) {
  check_conv_args("conv2d", input, weight, bias, 1, 0, stride, padding);
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(0), k = weight.dim(2);
  const std::size_t s = static_cast<std::size_t>(stride), p = static_cast<std::size_t>(padding);
  require(h + 2 * p >= k && w + 2 * p >= k,
          "conv2d: kernel " + std::to_string(k) + " larger than padded input " +
              shape_str(input.shape()) + " (axes 2,3)");
  const Geometry g{cin, h, w, k, s, p, (h + 2 * p - k) / s + 1, (w + 2 * p - k) / s + 1};

  Tensor<T> out({n, cout, g.oh, g.ow});
  std::vector<T> cols(g.rows() * g.cols());
  auto xv = input.values(), wv = weight.values();
  auto yv = out.mutable_values();
  for (std::size_t b = 0; b < n; ++b) {
    im2col(xv.data() + b * cin * h * w, g, cols.data());
    T* dst = yv.data() + b * cout * g.cols();
    if (bias.defined()) {
      for (std::size_t o = 0; o < cout; ++o)
        for (std::size_t q = 0; q < g.cols(); ++q) dst[o * g.cols() + q] = bias[o];
    }
    matmul_add(wv.data(), cols.data(), dst, cout, g.rows(), g.cols());
  }

  if (needs_grad<T>({&input, &weight, &bias})) {
    std::vector<Tensor<T>> inputs{input, weight};
    if (bias.defined()) inputs.push_back(bias);
    record_op<T>("conv2d", inputs, out, [input, weight, bias, out, g, n, cout]() mutable {
      auto gy = out.grad();
      auto xv = input.values(), wv = weight.values();
      const std::size_t in_size = g.channels * g.h * g.w;
      std::vector<T> cols(g.rows() * g.cols());
      for (std::size_t b = 0; b < n; ++b) {
        const T* gb = gy.data() + b * cout * g.cols();
        if (weight.requires_grad()) {
          im2col(xv.data() + b * in_size, g, cols.data());
          matmul_nt_add(gb, cols.data(), weight.mutable_grad().data(), cout, g.rows(), g.cols());
        }
        if (bias.defined() && bias.requires_grad()) {
          auto bg = bias.mutable_grad();
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t q = 0; q < g.cols(); ++q) bg[o] += gb[o * g.cols() + q];
        }
        if (input.requires_grad()) {
          std::fill(cols.begin(), cols.end(), T(0));
          matmul_tn_add(wv.data(), gb, cols.data(), cout, g.rows(), g.cols());
          col2im_add(cols.data(), g, input.mutable_grad().data() + b * in_size);
        }
      }
    });
  }
  debug_check_finite(out, "conv2d");
  return out;
}

template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                           int stride, int padding) {
  check_conv_args("conv_transpose2d", input, weight, bias, 0, 1, stride, padding);
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = weight.dim(1), k = weight.dim(2);
  const std::size_t s = static_cast<std::size_t>(stride), p = static_cast<std::size_t>(padding);
  const long oh_signed = static_cast<long>((h - 1) * s + k) - 2 * static_cast<long>(p);
  const long ow_signed = static_cast<long>((w - 1) * s + k) - 2 * static_cast<long>(p);
  require(oh_signed >= 1 && ow_signed >= 1,
          "conv_transpose2d: padding leaves no output for input " + shape_str(input.shape()));
  const std::size_t oh = static_cast<std::size_t>(oh_signed), ow = static_cast<std::size_t>(ow_signed);
  // The lowering geometry is that of the forward conv2d mapping out -> input.
  const Geometry g{cout, oh, ow, k, s, p, h, w};

  Tensor<T> out({n, cout, oh, ow});
  std::vector<T> cols(g.rows() * g.cols());
  auto xv = input.values(), wv = weight.values();
  auto yv = out.mutable_values();
  for (std::size_t b = 0; b < n; ++b) {
    std::fill(cols.begin(), cols.end(), T(0));
    matmul_tn_add(wv.data(), xv.data() + b * cin * h * w, cols.data(), cin, g.rows(), g.cols());
    T* dst = yv.data() + b * cout * oh * ow;
    col2im_add(cols.data(), g, dst);
    if (bias.defined()) {
      for (std::size_t c = 0; c < cout; ++c)
        for (std::size_t q = 0; q < oh * ow; ++q) dst[c * oh * ow + q] += bias[c];
    }
  }

  if (needs_grad<T>({&input, &weight, &bias})) {
    std::vector<Tensor<T>> inputs{input, weight};
    if (bias.defined()) inputs.push_back(bias);
    record_op<T>("conv_transpose2d", inputs, out, [input, weight, bias, out, g, n, cin]() mutable {
      auto gy = out.grad();
      auto xv = input.values(), wv = weight.values();
      const std::size_t out_size = g.channels * g.h * g.w;
      const std::size_t in_size = cin * g.cols();
      std::vector<T> cols(g.rows() * g.cols());
      for (std::size_t b = 0; b < n; ++b) {
        const T* gb = gy.data() + b * out_size;
        im2col(gb, g, cols.data());
        if (input.requires_grad()) {
          matmul_add(wv.data(), cols.data(), input.mutable_grad().data() + b * in_size, cin,
                     g.rows(), g.cols());
        }
        if (weight.requires_grad()) {
          matmul_nt_add(xv.data() + b * in_size, cols.data(), weight.mutable_grad().data(), cin,
                        g.rows(), g.cols());
        }
        if (bias.defined() && bias.requires_grad()) {
          auto bg = bias.mutable_grad();
          const std::size_t plane = g.h * g.w;
          for (std::size_t c = 0; c < g.channels; ++c)
            for (std::size_t q = 0; q < plane; ++q) bg[c] += gb[c * plane + q];
        }
      }
    });
  }
  debug_check_finite(out, "conv_transpose2d");
  return out;
}

template Tensor<float> conv2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, int, int);
template Tensor<double> conv2d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, int, int);
template Tensor<float> conv_transpose2d(const Tensor<float>&, const Tensor<float>&, const Tensor<float>&, int, int);
template Tensor<double> conv_transpose2d(const Tensor<double>&, const Tensor<double>&, const Tensor<double>&, int, int);

}  // namespace hydramix::numerics
