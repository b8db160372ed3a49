#include "doctest.h"

#include "helpers.hpp"
#include "hydramix/networks/checkpoint.hpp"
#include "hydramix/networks/networks.hpp"

namespace nw = hydramix::networks;
namespace mk = hydramix::masking;
using hydramix::RngStream;
using hydramix::numerics::Tensor;
using testing::random_tensor;

TEST_SUITE("networks") {

TEST_CASE("mix_features equals the per-position gather") {
  RngStream rng(41);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng.below(4), c = 1 + rng.below(3), h = 2 + rng.below(4), w = 2 + rng.below(4);
    const auto f = random_tensor({n, c, h, w}, rng);
    std::vector<mk::MixingMask> masks;
    for (int b = 0; b < 3; ++b) masks.push_back(mk::grid_mask(1 + rng.below(3), n, h, w, rng));
    const auto out = nw::mix_features(f, std::span<const mk::MixingMask>(masks));
    REQUIRE(out.shape() == hydramix::numerics::Shape{3, c, h, w});
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
          for (std::size_t x = 0; x < w; ++x) {
            const std::size_t src = masks[b].at(y, x);
            CHECK(out[((b * c + ch) * h + y) * w + x] == f[((src * c + ch) * h + y) * w + x]);
          }
  }
}

TEST_CASE("a reconstruction mask returns one source exactly") {
  RngStream rng(42);
  const auto f = random_tensor({4, 2, 3, 3}, rng);
  const auto out = nw::mix_features(f, mk::reconstruction_mask(2, 4, 3, 3));
  for (std::size_t i = 0; i < 18; ++i) CHECK(out[i] == f[2 * 18 + i]);
}

TEST_CASE("the default generator has two residual blocks on each side of the mix") {
  const nw::GeneratorConfig g;
  CHECK(g.n_res_enc == 2);
  CHECK(g.n_res_dec == 2);
}

TEST_CASE("generator shapes at dataset and lifted resolution") {
  RngStream init(1);
  nw::GeneratorConfig gc;
  gc.base_channels = 4;
  nw::Generator<float> gen(gc, init);
  const auto x = random_tensor<float>({2, 3, 16, 16}, init);
  const auto f = gen.encode(x);
  CHECK(f.shape() == hydramix::numerics::Shape{2, 16, 4, 4});
  const auto y = gen.decode(f);
  CHECK(y.shape() == x.shape());
  for (float v : y.values()) CHECK((v >= -1.0f && v <= 1.0f));

  gc.gen_image_size = 96;
  nw::Generator<float> big(gc, init);
  const auto small = random_tensor<float>({1, 3, 32, 32}, init);
  CHECK(big.operating_size(32) == 96);
  CHECK(big.feature_size(32) == 24);
  const auto lifted = big.lift(small);
  CHECK(lifted.shape() == hydramix::numerics::Shape{1, 3, 96, 96});
  CHECK(big.encode(lifted).shape() == hydramix::numerics::Shape{1, 16, 24, 24});
  const auto out = big.generate(small, mk::reconstruction_mask(0, 1, 24, 24));
  CHECK(out.shape() == hydramix::numerics::Shape{1, 3, 32, 32});
}

TEST_CASE("discriminator emits probabilities per patch") {
  RngStream init(2);
  nw::DiscriminatorConfig dc;
  dc.base_channels = 4;
  nw::Discriminator<float> d(dc, init);
  const auto p = d(random_tensor<float>({3, 3, 24, 24}, init));
  CHECK(p.shape() == hydramix::numerics::Shape{3, 1, 3, 3});
  for (float v : p.values()) CHECK((v > 0.0f && v < 1.0f));
  CHECK(d(random_tensor<float>({1, 3, 8, 8}, init)).shape() == hydramix::numerics::Shape{1, 1, 1, 1});
}

TEST_CASE("invalid generator configs are rejected") {
  nw::GeneratorConfig gc;
  gc.base_channels = 0;
  CHECK_THROWS_AS(gc.validate(), nw::ConfigError);
  gc = {};
  RngStream init(0);
  nw::Generator<float> gen(gc, init);
  CHECK_THROWS(gen.encode(random_tensor<float>({1, 3, 6, 6}, init)));
}

TEST_CASE("generator parameters survive a checkpoint roundtrip") {
  RngStream init(7);
  nw::GeneratorConfig gc;
  gc.base_channels = 4;
  nw::Generator<float> a(gc, init);
  nw::CheckpointFile file;
  file.config = gc;
  nw::append_parameters(file, a.parameters());
  const auto bytes = nw::serialize_checkpoint(file);
  const auto back = nw::deserialize_checkpoint(bytes);
  CHECK(back.records == file.records);
  CHECK(back.config == file.config);
  CHECK(nw::serialize_checkpoint(back) == bytes);

  RngStream other(99);
  nw::Generator<float> b(back.config.get<nw::GeneratorConfig>(), other);
  nw::restore_parameters(back, b.parameters());
  const auto x = random_tensor<float>({1, 3, 8, 8}, other);
  CHECK(testing::max_abs_diff(a.decode(a.encode(x)), b.decode(b.encode(x))) == 0.0);
}

TEST_CASE("restoring into a differently shaped network fails") {
  RngStream init(7);
  nw::GeneratorConfig gc;
  gc.base_channels = 4;
  nw::Generator<float> a(gc, init);
  nw::CheckpointFile file;
  nw::append_parameters(file, a.parameters());
  gc.base_channels = 8;
  nw::Generator<float> b(gc, init);
  CHECK_THROWS(nw::restore_parameters(file, b.parameters()));
}

}  // TEST_SUITE
