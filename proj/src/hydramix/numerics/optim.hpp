#pragma once

#include <span>
#include <vector>

#include "hydramix/numerics/tensor.hpp"

namespace hydramix::numerics {

template <typename T>
struct AdamState {
  std::vector<T> m;
  std::vector<T> v;
  long step = 0;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_param(const Tensor<T>& p, double beta1 = 0.5, double beta2 = 0.999,
                             double eps = 1e-8) {
    return AdamState{std::vector<T>(p.size(), T(0)), std::vector<T>(p.size(), T(0)), 0,
                     beta1, beta2, eps};
  }
};

/// Adam with bias correction and decoupled weight decay
/// (p <- p - lr*wd*p, then the Adam delta). Gradients are zeroed afterward.
template <typename T>
void adam_step(std::span<Tensor<T>> params, std::span<AdamState<T>> states, double lr,
               double weight_decay);

/// Heavy-ball SGD: v <- momentum*v + (g + wd*p); p <- p - lr*v. Zeroes gradients.
template <typename T>
void sgd_momentum_step(std::span<Tensor<T>> params, std::span<std::vector<T>> velocity,
                       double lr, double momentum, double weight_decay);

}  // namespace hydramix::numerics
