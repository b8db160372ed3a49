#include "hydramix/numerics/optim.hpp"

#include <cmath>
#include <string>

namespace hydramix::numerics {

namespace {
template <typename T>
void require_grad_slot(const Tensor<T>& p, std::size_t i, const char* op) {
  if (!p.has_grad()) {
    throw ContractError(std::string(op) + ": parameter " + std::to_string(i) +
                        " has no gradient (was backward() run?)");
  }
}
}  // namespace

template <typename T>
void adam_step(std::span<Tensor<T>> params, std::span<AdamState<T>> states, double lr,
               double weight_decay) {
  if (params.size() != states.size()) {
    throw ContractError("adam_step: " + std::to_string(params.size()) + " params but " +
                        std::to_string(states.size()) + " states");
  }
  if (!(lr > 0)) throw ContractError("adam_step: lr must be positive");
  for (std::size_t i = 0; i < params.size(); ++i) require_grad_slot(params[i], i, "adam_step");

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params[i];
    AdamState<T>& st = states[i];
    if (st.m.size() != p.size() || st.v.size() != p.size()) {
      throw DimensionError("adam_step: state " + std::to_string(i) + " does not match parameter " +
                           shape_str(p.shape()));
    }
    st.step += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
    auto pv = p.mutable_values();
    auto g = p.mutable_grad();
    for (std::size_t j = 0; j < pv.size(); ++j) {
      double value = pv[j];
      value -= lr * weight_decay * value;
      const double gj = g[j];
      const double m = st.beta1 * st.m[j] + (1.0 - st.beta1) * gj;
      const double v = st.beta2 * st.v[j] + (1.0 - st.beta2) * gj * gj;
      st.m[j] = static_cast<T>(m);
      st.v[j] = static_cast<T>(v);
      const double m_hat = m / bc1;
      const double v_hat = v / bc2;
      value -= lr * m_hat / (std::sqrt(v_hat) + st.eps);
      pv[j] = static_cast<T>(value);
      g[j] = T(0);
    }
  }
}

template <typename T>
void sgd_momentum_step(std::span<Tensor<T>> params, std::span<std::vector<T>> velocity, double lr,
                       double momentum, double weight_decay) {
  if (params.size() != velocity.size()) {
    throw ContractError("sgd_momentum_step: params and velocity counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) require_grad_slot(params[i], i, "sgd_momentum_step");
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor<T>& p = params[i];
    std::vector<T>& vel = velocity[i];
    if (vel.size() != p.size()) vel.assign(p.size(), T(0));
    auto pv = p.mutable_values();
    auto g = p.mutable_grad();
    for (std::size_t j = 0; j < pv.size(); ++j) {
      const double d = static_cast<double>(g[j]) + weight_decay * static_cast<double>(pv[j]);
      const double v = momentum * static_cast<double>(vel[j]) + d;
      vel[j] = static_cast<T>(v);
      pv[j] = static_cast<T>(static_cast<double>(pv[j]) - lr * v);
      g[j] = T(0);
    }
  }
}

template void adam_step<float>(std::span<Tensor<float>>, std::span<AdamState<float>>, double, double);
template void adam_step<double>(std::span<Tensor<double>>, std::span<AdamState<double>>, double, double);
template void sgd_momentum_step<float>(std::span<Tensor<float>>, std::span<std::vector<float>>, double,
                                       double, double);
template void sgd_momentum_step<double>(std::span<Tensor<double>>, std::span<std::vector<double>>,
                                        double, double, double);

}  // namespace hydramix::numerics
