#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "hydramix/masking/rng.hpp"
#include "hydramix/numerics/tensor.hpp"

namespace testing {

using hydramix::RngStream;
using hydramix::numerics::Shape;
using hydramix::numerics::Tensor;

template <typename T = double>
Tensor<T> random_tensor(Shape shape, RngStream& rng, double lo = -1.0, double hi = 1.0) {
  std::vector<T> v(hydramix::numerics::shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(lo + (hi - lo) * rng.uniform());
  return Tensor<T>(std::move(shape), std::move(v));
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - double(b[i])));
  return m;
}

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = std::filesystem::temp_directory_path() /
            ("hydramix_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
