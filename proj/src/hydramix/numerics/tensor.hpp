#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace hydramix::numerics {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

/// Raised when operand extents do not line up. The message names the axes.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an API precondition that is not about shapes is violated.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Dense row-major array with an optional gradient slot.
///
/// Tensor is a handle: copies share storage, which is what lets parameters be
/// updated in place by an optimizer while the tape keeps references to them.
/// Use clone() for a deep copy and detach() to cut the gradient link.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t size() const { return impl_->values.size(); }

  std::span<const T> values() const { return impl_->values; }
  std::span<T> mutable_values() { return impl_->values; }
  T operator[](std::size_t i) const { return impl_->values[i]; }
  T item() const;

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool flag);

  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  std::span<const T> grad() const { return impl_->grad; }
  /// Allocates a zero gradient on first access. The gradient slot lives in
  /// the shared storage, so const handles can write it.
  std::span<T> mutable_grad() const;
  void zero_grad() const;
  void drop_grad() const { impl_->grad.clear(); impl_->grad.shrink_to_fit(); }

  Tensor clone() const;
  Tensor detach() const { return clone(); }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

 private:
  struct Impl {
    Shape shape;
    std::vector<T> values;
    std::vector<T> grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Impl> impl_;
};

/// Throws ContractError if any value is NaN or infinite.
template <typename T>
void require_finite(std::span<const T> values, const char* what);

/// Ordered record of differentiable primitive applications.
///
/// Entries are appended as ops execute, so the list is topologically sorted by
/// construction. A tape is single-threaded; activate it with TapeScope.
template <typename T>
class Tape {
 public:
  struct Entry {
    const char* op;
    std::vector<Tensor<T>> inputs;
    Tensor<T> output;
    std::function<void()> backward;
  };

  void record(const char* op, std::vector<Tensor<T>> inputs, Tensor<T> output,
              std::function<void()> backward);

  /// Seeds dLoss/dLoss = 1 and runs every entry's rule once in reverse order.
  void backward(const Tensor<T>& loss);

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  void clear() { entries_.clear(); }

 private:
  std::vector<Entry> entries_;
};

template <typename T>
Tape<T>* active_tape();

/// Makes `tape` the recording target for the current thread until destroyed.
template <typename T>
class TapeScope {
 public:
  explicit TapeScope(Tape<T>& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape<T>* previous_;
};

template <typename T>
void backward(const Tensor<T>& loss, Tape<T>& tape) {
  tape.backward(loss);
}

/// True when a tape is active and any defined input requires a gradient.
template <typename T>
bool needs_grad(std::initializer_list<const Tensor<T>*> inputs);

/// Marks `output` as differentiable and appends its backward rule to the
/// active tape. Ops call this only after needs_grad() said yes.
template <typename T>
void record_op(const char* op, std::vector<Tensor<T>> inputs, Tensor<T>& output,
               std::function<void()> backward);

template <typename T>
void debug_check_finite(const Tensor<T>& t, const char* op) {
#ifndef NDEBUG
  require_finite<T>(t.values(), op);
#else
  (void)t;
  (void)op;
#endif
}

}  // namespace hydramix::numerics
