#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "helpers.hpp"
#include "hydramix/cse/cse.hpp"
#include "hydramix/io/run_config.hpp"

namespace cse = hydramix::cse;
using hydramix::RngStream;

namespace {

std::vector<float> unit(std::size_t d, std::size_t i) {
  std::vector<float> v(d, 0.0f);
  v[i] = 1.0f;
  return v;
}

std::vector<float> random_vec(std::size_t d, RngStream& rng) {
  std::vector<float> v(d);
  for (auto& x : v) x = static_cast<float>(rng.normal());
  return v;
}

}  // namespace

TEST_SUITE("cse") {

TEST_CASE("the default temperature is one hundredth") {
  CHECK(hydramix::io::CseSection{}.tau == 0.01);
}

TEST_CASE("entropy values") {
  const double half[] = {0.5, 0.25, 0.25};
  CHECK(cse::cse_class(half) == doctest::Approx(1.0397).epsilon(1e-4));
  CHECK(cse::cse_class(half) == doctest::Approx(1.5 * std::log(2.0)).epsilon(1e-14));
  std::vector<double> u(12, 1.0 / 12);
  CHECK(cse::cse_class(u) == doctest::Approx(2.4849).epsilon(1e-4));
  const double hot[] = {0.0, 1.0, 0.0};
  CHECK(cse::cse_class(hot) == 0.0);
}

TEST_CASE("cosine similarity matches dot over norms") {
  CHECK(cse::cosine_sim(unit(3, 0), unit(3, 0)) == doctest::Approx(1.0));
  CHECK(cse::cosine_sim(unit(3, 0), unit(3, 1)) == 0.0);
  RngStream rng(71);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_vec(16, rng), b = random_vec(16, rng);
    double d = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < 16; ++i) {
      d += double(a[i]) * b[i];
      na += double(a[i]) * a[i];
      nb += double(b[i]) * b[i];
    }
    CHECK(std::abs(cse::cosine_sim(a, b) - d / std::sqrt(na * nb)) <= 1e-12);
  }
}

TEST_CASE("uniform similarities give exactly ln N") {
  for (std::size_t n : {1, 2, 5, 12, 40}) {
    std::vector<std::vector<float>> hyps(n, unit(4, 0));
    const std::vector<std::vector<float>> imgs{unit(4, 1), unit(4, 2)};
    const auto p = cse::synset_distribution(imgs, hyps, 0.01);
    for (double v : p) CHECK(v == doctest::Approx(1.0 / double(n)).epsilon(1e-12));
    CHECK(std::abs(cse::cse_class(p) - std::log(double(n))) <= 1e-12);
  }
}

TEST_CASE("a single matching hyponym dominates at tau 0.01") {
  const std::vector<std::vector<float>> hyps{unit(4, 0), unit(4, 1), unit(4, 2), unit(4, 3)};
  const std::vector<std::vector<float>> img{unit(4, 0)};
  const auto p = cse::synset_distribution(img, hyps, 0.01);
  CHECK(p[0] > 1 - 1e-9);
  CHECK(cse::cse_class(p) <= 1e-6);
  CHECK(cse::cse_class(p) >= 0.0);
}

TEST_CASE("a set straddling two hyponyms scores above a clustered set") {
  // Hyponyms e1 and e2; the broad set has one image on each, the clustered
  // set two images on e1. The broad distribution is (1/2, 1/2) up to the
  // shared third hyponym, the clustered one concentrates on e1.
  const std::vector<std::vector<float>> hyps{unit(3, 0), unit(3, 1), unit(3, 2)};
  const std::vector<std::vector<float>> broad{unit(3, 0), unit(3, 1)};
  const std::vector<std::vector<float>> clustered{unit(3, 0), unit(3, 0)};
  const double hb = cse::cse_class(cse::synset_distribution(broad, hyps, 0.01));
  const double hc = cse::cse_class(cse::synset_distribution(clustered, hyps, 0.01));
  CHECK(hb > hc);
  CHECK(hb == doctest::Approx(std::log(2.0)).epsilon(1e-6));
}

TEST_CASE("distribution properties on random embeddings") {
  RngStream rng(72);
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 1 + rng.below(8), m = 1 + rng.below(6);
    std::vector<std::vector<float>> imgs, hyps;
    for (std::size_t i = 0; i < m; ++i) imgs.push_back(random_vec(8, rng));
    for (std::size_t j = 0; j < n; ++j) hyps.push_back(random_vec(8, rng));
    const auto p = cse::synset_distribution(imgs, hyps, 0.01 + rng.uniform());
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-9);
    const double h = cse::cse_class(p);
    CHECK(h >= 0.0);
    CHECK(h <= std::log(double(n)) + 1e-12);

    auto shuffled = imgs;
    std::reverse(shuffled.begin(), shuffled.end());
    const auto q = cse::synset_distribution(shuffled, hyps, 0.01);
    const auto p01 = cse::synset_distribution(imgs, hyps, 0.01);
    for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(q[j] - p01[j]) <= 1e-12);
  }
}

TEST_CASE("the distribution of a set is the mean over its images") {
  RngStream rng(73);
  std::vector<std::vector<float>> hyps;
  for (int j = 0; j < 5; ++j) hyps.push_back(random_vec(6, rng));
  const auto a = random_vec(6, rng), b = random_vec(6, rng);
  const auto pa = cse::synset_distribution({a}, hyps, 0.05);
  const auto pb = cse::synset_distribution({b}, hyps, 0.05);
  const auto pab = cse::synset_distribution({a, b}, hyps, 0.05);
  const auto paab = cse::synset_distribution({a, a, b}, hyps, 0.05);
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(pab[j] == doctest::Approx((pa[j] + pb[j]) / 2).epsilon(1e-14));
    CHECK(paab[j] == doctest::Approx((2 * pa[j] + pb[j]) / 3).epsilon(1e-14));
  }
}

TEST_CASE("dataset scores average over classes with hyponyms") {
  cse::EmbeddingTable table(2);
  table.add("h1", {1, 0});
  table.add("h2", {0, 1});
  table.add("x1", {1, 0});
  table.add("x2", {0, 1});
  table.add("y1", {1, 1});
  const std::vector<cse::SynsetRecord> synsets{{"a", {"A"}, "first", {"h1", "h2"}},
                                               {"b", {"B"}, "second", {"h1", "h2"}},
                                               {"c", {"C"}, "leaf", {}}};
  const std::map<std::string, std::vector<std::string>> per_class{{"a", {"x1"}}, {"b", {"y1"}}, {"c", {"x2"}}};
  const auto r = cse::cse_dataset(per_class, synsets, table, 0.01);
  REQUIRE(r.classes.size() == 2);
  CHECK(r.classes[0].cse == doctest::Approx(0.0).epsilon(1e-6));
  CHECK(r.classes[1].cse == doctest::Approx(std::log(2.0)).epsilon(1e-9));
  CHECK(r.overall == doctest::Approx(std::log(2.0) / 2).epsilon(1e-6));
  CHECK(r.skipped == std::vector<std::string>{"c"});
  CHECK(r.classes[1].max_cse == doctest::Approx(std::log(2.0)));
}

TEST_CASE("synset text and embedding table rules") {
  const cse::SynsetRecord s{"n1", {"dog", "domestic dog"}, "a member of the genus Canis", {}};
  CHECK(cse::synset_to_text(s) == "dog, domestic dog: a member of the genus Canis");
  cse::EmbeddingTable t(3);
  t.add("a", {3, 0, 4});
  CHECK(t.at("a")[0] == doctest::Approx(0.6));
  CHECK_THROWS(t.add("a", {1, 0, 0}));
  CHECK_THROWS(t.add("z", {0, 0, 0}));
  CHECK_THROWS(t.add("w", {1, 0}));
  CHECK_THROWS_AS(t.at("missing"), std::out_of_range);
}

TEST_CASE("embedding files roundtrip bit-exactly") {
  RngStream rng(74);
  for (int t = 0; t < 100; ++t) {
    const std::size_t d = 1 + rng.below(16);
    cse::EmbeddingTable table(d);
    const std::size_t n = rng.below(10);
    for (std::size_t i = 0; i < n; ++i) table.add("id_" + std::to_string(t) + "_" + std::to_string(i), random_vec(d, rng));
    const auto bytes = cse::serialize_embeddings(table);
    const auto back = cse::deserialize_embeddings(bytes);
    CHECK(back == table);
    CHECK(cse::serialize_embeddings(back) == bytes);
  }
}

TEST_CASE("corrupt embedding files name the offset") {
  cse::EmbeddingTable table(2);
  table.add("a", {1, 0});
  auto bytes = cse::serialize_embeddings(table);
  bytes[0] = 'X';
  try {
    cse::deserialize_embeddings(bytes, "emb.bin");
    FAIL("expected a format error");
  } catch (const std::exception& e) {
    CHECK(std::string(e.what()).find("offset 0") != std::string::npos);
  }
  bytes = cse::serialize_embeddings(table);
  bytes.resize(bytes.size() - 3);
  CHECK_THROWS(cse::deserialize_embeddings(bytes));
}

}  // TEST_SUITE
