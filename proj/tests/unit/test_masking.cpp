#include "doctest.h"

#include <set>

#include "helpers.hpp"
#include "hydramix/masking/masking.hpp"

namespace mk = hydramix::masking;
namespace seg = hydramix::segmentation;
using hydramix::RngStream;

namespace {

seg::SegmentationMap single_segment(std::size_t h, std::size_t w) {
  return seg::SegmentationMap::from_labels(h, w, std::vector<std::uint32_t>(h * w, 0));
}

seg::SegmentationMap random_map(std::size_t h, std::size_t w, std::size_t labels, RngStream& rng) {
  std::vector<std::uint32_t> raw(h * w);
  for (auto& l : raw) l = static_cast<std::uint32_t>(rng.below(labels));
  return seg::SegmentationMap::from_labels(h, w, raw);
}

void check_one_hot(const mk::MixingMask& m) {
  const auto oh = m.one_hot<double>();
  const std::size_t hw = m.height * m.width;
  for (std::size_t p = 0; p < hw; ++p) {
    double total = 0;
    for (std::size_t i = 0; i < m.n_sources; ++i) {
      const double v = oh[i * hw + p];
      REQUIRE((v == 0.0 || v == 1.0));
      total += v;
    }
    REQUIRE(total == 1.0);
  }
}

}  // namespace

TEST_SUITE("masking") {

TEST_CASE("rng streams are reproducible and splits are independent") {
  RngStream a(5), b(5);
  for (int i = 0; i < 10; ++i) CHECK(a() == b());
  RngStream root(5);
  auto s1 = root.split("masks"), s2 = root.split("batches");
  CHECK(s1() != s2());
  RngStream resumed(5, 3);
  RngStream fresh(5);
  fresh();
  fresh();
  fresh();
  CHECK(resumed() == fresh());
  const auto pick = RngStream(1).choose(10, 10);
  CHECK(std::set<std::size_t>(pick.begin(), pick.end()).size() == 10);
}

TEST_CASE("segment and grid masks are binary and sum to one everywhere") {
  RngStream rng(17);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 1 + rng.below(4);
    std::vector<seg::SegmentationMap> maps;
    for (std::size_t i = 0; i < n; ++i) maps.push_back(random_map(6, 5, 1 + rng.below(5), rng));
    const auto m = mk::sample_segment_mask(maps, rng.uniform(), rng);
    mk::validate(m);
    check_one_hot(m);
    const auto g = mk::grid_mask(1 + rng.below(4), n, 6, 5, rng);
    mk::validate(g);
    check_one_hot(g);
  }
}

TEST_CASE("segment mask edge cases") {
  RngStream rng(3);
  const std::vector<seg::SegmentationMap> one{single_segment(4, 4)};
  for (auto a : mk::sample_segment_mask(one, 0.5, rng).assignment) CHECK(a == 0);
  const std::vector<seg::SegmentationMap> two{single_segment(4, 4), single_segment(4, 4)};
  for (auto a : mk::sample_segment_mask(two, 0.0, rng).assignment) CHECK(a == 0);
  for (auto a : mk::sample_segment_mask(two, 1.0, rng).assignment) CHECK(a == 1);
  const std::vector<seg::SegmentationMap> bad{single_segment(4, 4), single_segment(3, 4)};
  CHECK_THROWS_AS(mk::sample_segment_mask(bad, 0.5, rng), hydramix::numerics::DimensionError);
}

TEST_CASE("later sources overwrite earlier ones") {
  RngStream rng(4);
  const std::vector<seg::SegmentationMap> three{single_segment(2, 2), single_segment(2, 2),
                                                single_segment(2, 2)};
  for (auto a : mk::sample_segment_mask(three, 1.0, rng).assignment) CHECK(a == 2);
}

TEST_CASE("selection frequency matches p_select") {
  RngStream rng(23);
  const std::vector<seg::SegmentationMap> two{single_segment(3, 3), single_segment(3, 3)};
  std::size_t hits = 0;
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) hits += mk::sample_segment_mask(two, 0.5, rng).at(1, 2) == 1;
  CHECK(std::abs(double(hits) / draws - 0.5) <= 0.02);
}

TEST_CASE("grid cells are uniform over sources") {
  RngStream rng(29);
  std::vector<std::size_t> ones(16, 0);
  const int draws = 10000;
  for (int t = 0; t < draws; ++t) {
    const auto g = mk::grid_mask(4, 2, 8, 8, rng);
    for (std::size_t cy = 0; cy < 4; ++cy)
      for (std::size_t cx = 0; cx < 4; ++cx) ones[cy * 4 + cx] += g.at(cy * 2, cx * 2);
  }
  for (auto c : ones) CHECK(std::abs(double(c) / draws - 0.5) <= 0.02);
}

TEST_CASE("grid cells are constant blocks") {
  RngStream rng(2);
  const auto g = mk::grid_mask(4, 3, 8, 8, rng);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) CHECK(g.at(y, x) == g.at(y / 2 * 2, x / 2 * 2));
  const auto whole = mk::grid_mask(1, 3, 5, 5, rng);
  for (auto a : whole.assignment) CHECK(a == whole.assignment[0]);
  for (auto a : mk::grid_mask(4, 1, 8, 8, rng).assignment) CHECK(a == 0);
}

TEST_CASE("reconstruction masks select one plane") {
  const auto m = mk::reconstruction_mask(2, 4, 3, 5);
  const auto oh = m.one_hot<double>();
  for (std::size_t i = 0; i < 4; ++i) {
    double s = 0;
    for (std::size_t p = 0; p < 15; ++p) s += oh[i * 15 + p];
    CHECK(s == (i == 2 ? 15.0 : 0.0));
  }
  CHECK_THROWS(mk::reconstruction_mask(4, 4, 3, 5));
}

TEST_CASE("segmentation noise replaces the requested fraction of segments") {
  RngStream rng(31);
  // Image 0 is ten horizontal stripes, image 1 ten vertical ones, so a
  // replaced stripe of image 0 is the only kind whose row is not constant.
  std::vector<std::uint32_t> rows(100), cols(100);
  for (std::size_t i = 0; i < 100; ++i) {
    rows[i] = static_cast<std::uint32_t>(i / 10);
    cols[i] = static_cast<std::uint32_t>(i % 10);
  }
  const std::vector<seg::SegmentationMap> maps{seg::SegmentationMap::from_labels(10, 10, rows),
                                               seg::SegmentationMap::from_labels(10, 10, cols)};
  std::size_t replaced = 0, total = 0;
  for (int t = 0; t < 1000; ++t) {
    const auto out = mk::perturb_segmentation(maps, 0.3, rng);
    seg::validate(out[0]);
    for (std::size_t r = 0; r < 10; ++r) {
      bool constant = true;
      for (std::size_t c = 1; c < 10; ++c) constant = constant && out[0].at(r, c) == out[0].at(r, 0);
      replaced += !constant;
      ++total;
    }
  }
  CHECK(std::abs(double(replaced) / double(total) - 0.3) <= 0.02);
}

TEST_CASE("segmentation noise edge cases") {
  RngStream rng(5);
  std::vector<seg::SegmentationMap> maps{random_map(5, 5, 4, rng), random_map(5, 5, 3, rng)};
  CHECK(mk::perturb_segmentation(maps, 0.0, rng) == maps);
  const auto all = mk::perturb_segmentation(maps, 1.0, rng);
  CHECK(all[0] == seg::SegmentationMap::from_labels(5, 5, maps[1].labels));
  CHECK(all[1] == seg::SegmentationMap::from_labels(5, 5, maps[0].labels));
  const std::vector<seg::SegmentationMap> lone{maps[0]};
  CHECK_THROWS(mk::perturb_segmentation(lone, 0.5, rng));
}

TEST_CASE("pixel upscale uses floor mapping") {
  RngStream rng(6);
  const auto m = mk::grid_mask(3, 3, 3, 3, rng);
  const auto up = mk::upscale_mask_to_pixels(m, 7, 8);
  for (std::size_t y = 0; y < 7; ++y)
    for (std::size_t x = 0; x < 8; ++x) CHECK(up.at(y, x) == m.at(y * 3 / 7, x * 3 / 8));
}

}  // TEST_SUITE
