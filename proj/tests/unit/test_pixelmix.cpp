#include "doctest.h"

#include <numeric>

#include "helpers.hpp"
#include "hydramix/pixelmix/pixelmix.hpp"

namespace px = hydramix::pixelmix;
namespace mk = hydramix::masking;
using hydramix::RngStream;
using hydramix::numerics::Tensor;
using testing::random_tensor;

TEST_SUITE("pixelmix") {

TEST_CASE("beta draws have the symmetric mean") {
  RngStream rng(61);
  double s = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) s += rng.beta(1.0, 1.0);
  CHECK(std::abs(s / n - 0.5) <= 0.01);
}

TEST_CASE("dirichlet draws have mean 1/N") {
  RngStream rng(62);
  const std::size_t k = 4;
  std::vector<double> s(k, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto w = rng.dirichlet(k, 1.0);
    REQUIRE(std::abs(std::accumulate(w.begin(), w.end(), 0.0) - 1.0) < 1e-12);
    for (std::size_t j = 0; j < k; ++j) s[j] += w[j];
  }
  for (double v : s) CHECK(std::abs(v / n - 0.25) <= 0.01);
}

TEST_CASE("mixup with a fixed lambda") {
  RngStream rng(63);
  const auto a = random_tensor<float>({3, 4, 4}, rng), b = random_tensor<float>({3, 4, 4}, rng);
  const auto m = px::mixup_with_lambda(a, b, 0, 2, 3, 0.3);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(m.image[i] == doctest::Approx(0.3 * a[i] + 0.7 * b[i]).epsilon(1e-6));
  CHECK(m.label_weights == std::vector<double>{0.3, 0.0, 0.7});
  const auto same = px::mixup_with_lambda(a, b, 1, 1, 3, 0.3);
  CHECK(same.label_weights[1] == doctest::Approx(1.0));
  const auto one = px::mixup_with_lambda(a, b, 0, 2, 3, 1.0);
  CHECK(testing::max_abs_diff(one.image, a) == 0.0);
}

TEST_CASE("mixup-n weights sum to one and match the image") {
  RngStream rng(64);
  const auto imgs = random_tensor<float>({3, 2, 3, 3}, rng);
  const int labels[] = {0, 1, 1};
  const double w[] = {0.2, 0.5, 0.3};
  const auto m = px::mixup_n_with_weights(imgs, labels, 2, w);
  for (std::size_t i = 0; i < 18; ++i)
    CHECK(m.image[i] == doctest::Approx(0.2 * imgs[i] + 0.5 * imgs[18 + i] + 0.3 * imgs[36 + i]).epsilon(1e-6));
  CHECK(m.label_weights[0] == doctest::Approx(0.2));
  CHECK(m.label_weights[1] == doctest::Approx(0.8));
  const auto r = px::mixup_n(imgs, labels, 2, 1.0, rng);
  CHECK(r.label_weights[0] + r.label_weights[1] == doctest::Approx(1.0));
}

TEST_CASE("mask_mix_pixels equals the per-pixel gather") {
  RngStream rng(65);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng.below(4), c = 3, h = 5, w = 7;
    const auto imgs = random_tensor<float>({n, c, h, w}, rng);
    const auto mask = mk::upscale_mask_to_pixels(mk::grid_mask(2, n, 3, 3, rng), h, w);
    const auto out = px::mask_mix_pixels(imgs, mask);
    REQUIRE(out.size() == c * h * w);
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t y = 0; y < h; ++y)
        for (std::size_t x = 0; x < w; ++x)
          CHECK(out[(ch * h + y) * w + x] == imgs[((mask.at(y, x) * c + ch) * h + y) * w + x]);
  }
}

TEST_CASE("mask size must match the images") {
  RngStream rng(66);
  const auto imgs = random_tensor<float>({2, 3, 5, 5}, rng);
  CHECK_THROWS(px::mask_mix_pixels(imgs, mk::grid_mask(2, 2, 4, 4, rng)));
}

}  // TEST_SUITE
