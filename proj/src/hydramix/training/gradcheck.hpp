#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hydramix/numerics/tensor.hpp"

namespace hydramix::training {

struct GradcheckResult {
  std::string name;
  double max_rel_error = 0;
  double tolerance = 0;
  std::size_t coordinates = 0;  // compared coordinates
  std::size_t skipped = 0;      // probes whose stencil crossed a branch point

  /// Within tolerance, with at least half of the probes compared.
  bool passed() const { return coordinates > 0 && max_rel_error <= tolerance && skipped <= coordinates; }
};

using GradFunction = std::function<numerics::Tensor<double>(const std::vector<numerics::Tensor<double>>&)>;

/// Compares reverse-mode gradients of sum(f(inputs) * R), R a fixed random
/// projection, against central differences with step `step`. Per coordinate the
/// error is |analytic - numeric| / max(|analytic|, |numeric|, 1e-6 * max(1, |L|)),
/// L the projected objective at the unperturbed inputs, so coordinates with a
/// zero gradient are judged against the rounding noise of L itself. At most
/// `max_coords` coordinates per input are probed (evenly spaced). A probe whose
/// perturbed evaluations take different branches of a piecewise op than the
/// unperturbed one (see numerics::BranchTrace) straddles a point where the
/// function is not differentiable; it is counted as skipped, not compared.
GradcheckResult gradcheck(const std::string& name, const GradFunction& f,
                          std::vector<numerics::Tensor<double>> inputs, double tolerance,
                          std::uint64_t seed, double step = 1e-4, std::size_t max_coords = 64);

/// Every differentiable primitive (tolerance 1e-4) followed by the composed
/// micro generator (8x8 images, base 4, one downsampling, N = 2; tolerance 1e-3),
/// both its forward pass and its full training objective.
std::vector<GradcheckResult> run_gradcheck_suite(std::uint64_t seed = 0, bool composed = true);

}  // namespace hydramix::training
