#pragma once

// Differentiable primitives. Every op is a pure function of its inputs; when a
// tape is active (TapeScope) and an input requires a gradient, the op records
// its backward rule.

#include <cstdint>
#include <span>
#include <vector>

#include "hydramix/numerics/tensor.hpp"

namespace hydramix::numerics {

// Elementwise and structural ---------------------------------------------------

template <typename T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <typename T> Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T> Tensor<T> sum(const Tensor<T>& a);
template <typename T> Tensor<T> mean(const Tensor<T>& a);
template <typename T> Tensor<T> reshape(const Tensor<T>& a, Shape shape);

/// Concatenates along axis 0; trailing extents must agree.
template <typename T> Tensor<T> concat(std::span<const Tensor<T>> parts);
/// Rows [begin, end) of axis 0.
template <typename T> Tensor<T> slice(const Tensor<T>& a, std::size_t begin, std::size_t end);
/// Picks rows of axis 0 by index (repeats allowed).
template <typename T> Tensor<T> index_select(const Tensor<T>& a, std::span<const std::size_t> rows);

// Spatial (NCHW) ---------------------------------------------------------------

/// Weight is O x I x K x K. `bias` may be an undefined tensor.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int stride, int padding);

/// Weight is I x O x K x K (input channels first). Adjoint of conv2d.
template <typename T>
Tensor<T> conv_transpose2d(const Tensor<T>& input, const Tensor<T>& weight,
                           const Tensor<T>& bias, int stride, int padding);

/// Per (n, c) slice normalization without affine parameters. Biased variance.
template <typename T> Tensor<T> instance_norm(const Tensor<T>& input, T eps);

/// Edge-replicating border of `pad` pixels on all four sides.
template <typename T> Tensor<T> pad_replicate(const Tensor<T>& input, int pad);

/// Spatial window [top, top+h) x [left, left+w).
template <typename T>
Tensor<T> crop(const Tensor<T>& input, std::size_t top, std::size_t left, std::size_t h,
               std::size_t w);

template <typename T> Tensor<T> max_pool2d(const Tensor<T>& input, int window);

template <typename T> Tensor<T> horizontal_flip(const Tensor<T>& input);

enum class ResizeMode { bilinear, nearest };

/// Bilinear uses the align_corners=false convention with edge clamping;
/// nearest picks floor(dst * in / out).
template <typename T>
Tensor<T> resize(const Tensor<T>& input, std::size_t out_h, std::size_t out_w, ResizeMode mode);

// Dense ------------------------------------------------------------------------

/// input N x F, weight O x F, bias O (optional) -> N x O.
template <typename T>
Tensor<T> linear(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias);

// Activations ------------------------------------------------------------------

struct Activation {
  enum class Kind { relu, leaky_relu, sigmoid, tanh };
  Kind kind = Kind::relu;
  double slope = 0.2;

  static Activation relu() { return {Kind::relu, 0.0}; }
  static Activation leaky(double slope = 0.2) { return {Kind::leaky_relu, slope}; }
  static Activation sigmoid() { return {Kind::sigmoid, 0.0}; }
  static Activation tanh() { return {Kind::tanh, 0.0}; }
};

template <typename T> Tensor<T> activation(const Tensor<T>& input, Activation act);

// Losses (mean reduction, scalar output) ---------------------------------------

enum class LossKind { mse, l1, bce, softmax_cross_entropy };

inline constexpr double kBceClamp = 1e-7;

template <typename T> Tensor<T> mse_loss(const Tensor<T>& pred, const Tensor<T>& target);
template <typename T> Tensor<T> l1_loss(const Tensor<T>& pred, const Tensor<T>& target);
/// Probabilities are clamped to [1e-7, 1 - 1e-7]; target is not differentiated.
template <typename T> Tensor<T> bce_loss(const Tensor<T>& prob, const Tensor<T>& target);
/// Logits N x K against integer labels.
template <typename T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const int> labels);
/// Logits N x K against per-row probability targets N x K.
template <typename T>
Tensor<T> soft_cross_entropy(const Tensor<T>& logits, const Tensor<T>& target);

/// Dispatcher over the four losses. For cross-entropy `target` holds one class
/// index per row (stored as a float value).
template <typename T>
Tensor<T> reduce_loss(const Tensor<T>& pred, const Tensor<T>& target, LossKind kind);

/// Row-wise softmax, forward only.
template <typename T> Tensor<T> softmax_rows(const Tensor<T>& logits);

/// Fingerprint of the branches taken by piecewise-linear ops (ReLU and leaky
/// ReLU signs, signs inside l1_loss, max-pool selections, bce_loss clamping)
/// on this thread while the trace is alive. Two evaluations with equal
/// fingerprints lie on the same smooth piece. Traces do not nest.
class BranchTrace {
 public:
  BranchTrace();
  ~BranchTrace();
  BranchTrace(const BranchTrace&) = delete;
  BranchTrace& operator=(const BranchTrace&) = delete;

  std::uint64_t fingerprint() const { return hash_; }

 private:
  std::uint64_t hash_ = 0xcbf29ce484222325ULL;
};

namespace detail {
extern thread_local std::uint64_t* branch_hash;
inline void trace_branch(std::uint64_t value) {
  if (branch_hash) *branch_hash = (*branch_hash ^ value) * 0x100000001b3ULL;
}
}  // namespace detail

}  // namespace hydramix::numerics
