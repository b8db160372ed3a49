#include "hydramix/numerics/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hydramix::numerics {

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

template <typename T>
void require_finite(std::span<const T> values, const char* what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw ContractError(std::string(what) + ": non-finite value at flat index " +
                          std::to_string(i));
    }
  }
}

namespace {
void check_shape(const Shape& shape) {
  if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (shape[i] == 0) {
      throw DimensionError("tensor extent must be positive (axis " + std::to_string(i) +
                           " of " + shape_str(shape) + ")");
    }
  }
}
}  // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, T fill) : impl_(std::make_shared<Impl>()) {
  check_shape(shape);
  if (!std::isfinite(fill)) throw ContractError("tensor fill value is not finite");
  impl_->values.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : impl_(std::make_shared<Impl>()) {
  check_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " holds " +
                         std::to_string(shape_numel(shape)) + " values, got " +
                         std::to_string(values.size()));
  }
  require_finite<T>(values, "tensor construction");
  impl_->shape = std::move(shape);
  impl_->values = std::move(values);
}

template <typename T>
T Tensor<T>::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return impl_->values[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool flag) {
  impl_->requires_grad = flag;
  return *this;
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), T(0));
  return impl_->grad;
}

template <typename T>
void Tensor<T>::zero_grad() const {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::clone() const {
  Tensor out;
  out.impl_ = std::make_shared<Impl>();
  out.impl_->shape = impl_->shape;
  out.impl_->values = impl_->values;
  return out;
}

template <typename T>
void Tape<T>::record(const char* op, std::vector<Tensor<T>> inputs, Tensor<T> output,
                     std::function<void()> backward) {
  entries_.push_back(Entry{op, std::move(inputs), std::move(output), std::move(backward)});
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss");
  }
  if (!loss.requires_grad()) {
    throw ContractError("backward(): loss was not produced through a recording tape");
  }
  Tensor<T> seed = loss;
  seed.mutable_grad()[0] += T(1);
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) {
    if (!it->output.has_grad()) continue;
    it->backward();
  }
}

namespace {
template <typename T>
Tape<T>*& current_tape() {
  thread_local Tape<T>* tape = nullptr;
  return tape;
}
}  // namespace

template <typename T>
Tape<T>* active_tape() {
  return current_tape<T>();
}

template <typename T>
TapeScope<T>::TapeScope(Tape<T>& tape) : previous_(current_tape<T>()) {
  current_tape<T>() = &tape;
}

template <typename T>
TapeScope<T>::~TapeScope() {
  current_tape<T>() = previous_;
}

template <typename T>
bool needs_grad(std::initializer_list<const Tensor<T>*> inputs) {
  if (active_tape<T>() == nullptr) return false;
  for (const Tensor<T>* t : inputs) {
    if (t && t->defined() && t->requires_grad()) return true;
  }
  return false;
}

template <typename T>
void record_op(const char* op, std::vector<Tensor<T>> inputs, Tensor<T>& output,
               std::function<void()> backward) {
  Tape<T>* tape = active_tape<T>();
  if (tape == nullptr) throw ContractError(std::string(op) + ": no active tape");
  output.set_requires_grad(true);
  tape->record(op, std::move(inputs), output, std::move(backward));
}

#define HM_INSTANTIATE(T)                                                              \
  template void require_finite<T>(std::span<const T>, const char*);                   \
  template class Tensor<T>;                                                            \
  template class Tape<T>;                                                              \
  template class TapeScope<T>;                                                         \
  template Tape<T>* active_tape<T>();                                                  \
  template bool needs_grad<T>(std::initializer_list<const Tensor<T>*>);                \
  template void record_op<T>(const char*, std::vector<Tensor<T>>, Tensor<T>&,          \
                             std::function<void()>);

HM_INSTANTIATE(float)
HM_INSTANTIATE(double)
#undef HM_INSTANTIATE

}  // namespace hydramix::numerics
