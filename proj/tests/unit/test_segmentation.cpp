#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "helpers.hpp"
#include "oracles.hpp"
#include "hydramix/segmentation/segmentation.hpp"

namespace seg = hydramix::segmentation;
using hydramix::RngStream;
using hydramix::numerics::Tensor;
using oracle::Reference;
using oracle::canonical;

namespace {

Tensor<double> image_of(const Reference& r) {
  return Tensor<double>({r.c, r.h, r.w}, r.img);
}

}  // namespace

TEST_SUITE("segmentation") {

TEST_CASE("impulse response reproduces the Gaussian taps") {
  const double sigma = 1.2;
  Tensor<double> img({1, 15, 15}, 0.0);
  img.mutable_values()[7 * 15 + 7] = 1.0;
  const auto out = seg::gaussian_smooth(img, sigma);
  const int r = static_cast<int>(std::ceil(3 * sigma));
  double norm = 0;
  for (int i = -r; i <= r; ++i) norm += std::exp(-0.5 * i * i / (sigma * sigma));
  const double g0 = 1.0 / norm;
  double total = 0;
  for (double v : out.values()) total += v;
  CHECK(std::abs(total - 1.0) < 1e-6);
  for (int i = -r; i <= r; ++i) {
    const double gi = std::exp(-0.5 * i * i / (sigma * sigma)) / norm;
    CHECK(out[7 * 15 + 7 + i] == doctest::Approx(g0 * gi).epsilon(1e-12));
    CHECK(out[(7 + i) * 15 + 7] == doctest::Approx(g0 * gi).epsilon(1e-12));
  }
}

TEST_CASE("smoothing leaves constants and sigma zero untouched") {
  const Tensor<double> c({3, 6, 5}, 0.4);
  const auto smoothed = seg::gaussian_smooth(c, 2.0);
  for (double v : smoothed.values()) CHECK(v == doctest::Approx(0.4).epsilon(1e-14));
  RngStream rng(4);
  const auto x = testing::random_tensor({2, 4, 4}, rng, 0, 1);
  CHECK(testing::max_abs_diff(seg::gaussian_smooth(x, 0.0), x) == 0.0);
}

TEST_CASE("black and white halves give exactly two segments") {
  Tensor<double> img({3, 8, 8}, 0.0);
  auto v = img.mutable_values();
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t x = 4; x < 8; ++x) v[c * 64 + y * 8 + x] = 1.0;
  const auto s = seg::felzenszwalb(img, {100.0, 0.0, 1});
  REQUIRE(s.segment_count() == 2);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) CHECK(s.at(y, x) == (x < 4 ? 0u : 1u));
}

TEST_CASE("a uniform image is one segment") {
  const Tensor<double> img({3, 9, 7}, 0.3);
  CHECK(seg::felzenszwalb(img, {}).segment_count() == 1);
}

TEST_CASE("felzenszwalb agrees with the reference on random images") {
  struct Setting {
    double k, sigma;
    int min_size;
  };
  const Setting settings[] = {{300.0, 0.0, 1}, {300.0, 0.8, 3}, {800.0, 0.5, 5}};
  for (const auto& st : settings) {
    for (std::uint64_t s = 0; s < 100; ++s) {
      RngStream rng(1000 + s);
      Reference ref{8, 8, 3, {}};
      for (std::size_t i = 0; i < 3 * 64; ++i) ref.img.push_back(rng.uniform());
      const auto got = seg::felzenszwalb(image_of(ref), {st.k, st.sigma, st.min_size});
      seg::validate(got);
      INFO("seed " << s << " k " << st.k << " sigma " << st.sigma);
      CHECK(got.labels == canonical(ref.run(st.k, st.sigma, std::size_t(st.min_size))));
    }
  }
}

TEST_CASE("larger k never produces more segments on the two-region image") {
  Tensor<double> img({1, 8, 8}, 0.2);
  auto v = img.mutable_values();
  for (std::size_t i = 0; i < 64; ++i)
    if (i % 8 >= 4) v[i] = 0.8;
  std::size_t prev = 64;
  for (double k : {1.0, 10.0, 100.0, 1000.0, 1e5}) {
    const auto n = seg::felzenszwalb(img, {k, 0.0, 1}).segment_count();
    CHECK(n <= prev);
    prev = n;
  }
}

TEST_CASE("felzenszwalb is deterministic") {
  RngStream rng(8);
  const auto img = testing::random_tensor({3, 12, 12}, rng, 0, 1);
  CHECK(seg::felzenszwalb(img, {50.0, 0.8, 4}) == seg::felzenszwalb(img, {50.0, 0.8, 4}));
}

TEST_CASE("downscale of a random 9x9 map matches floor indexing") {
  RngStream rng(9);
  for (int t = 0; t < 20; ++t) {
    std::vector<std::uint32_t> raw(81);
    for (auto& l : raw) l = static_cast<std::uint32_t>(rng.below(6));
    const auto map = seg::SegmentationMap::from_labels(9, 9, raw);
    const auto small = seg::downscale_segmentation(map, 3, 3);
    std::vector<std::uint32_t> want(9);
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t x = 0; x < 3; ++x) want[y * 3 + x] = map.labels[(y * 3) * 9 + x * 3];
    CHECK(small.labels == canonical(want));
    seg::validate(small);
  }
}

TEST_CASE("quadrant map downscales to one label per quadrant") {
  std::vector<std::uint32_t> raw(16);
  for (std::size_t y = 0; y < 4; ++y)
    for (std::size_t x = 0; x < 4; ++x) raw[y * 4 + x] = (y / 2) * 2 + x / 2;
  const auto map = seg::SegmentationMap::from_labels(4, 4, raw);
  const auto small = seg::downscale_segmentation(map, 2, 2);
  CHECK(small.labels == std::vector<std::uint32_t>{0, 1, 2, 3});
  CHECK(seg::downscale_segmentation(map, 4, 4) == map);
  CHECK_THROWS_AS(seg::downscale_segmentation(map, 5, 4), hydramix::numerics::DimensionError);
}

TEST_CASE("parameter validation") {
  CHECK_THROWS(seg::SegParams{0.0, 0.8, 10}.validate());
  CHECK_THROWS(seg::SegParams{1.0, -1.0, 10}.validate());
  CHECK_THROWS(seg::SegParams{1.0, 0.8, 0}.validate());
  const auto d = seg::SegParams::defaults_for(96, 96);
  CHECK(d.k == 100.0);
  CHECK(d.sigma == 0.8);
  CHECK(d.min_size == 10);
}

}  // TEST_SUITE
