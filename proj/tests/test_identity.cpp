#include <cmath>
#include <vector>

#include "doctest.h"
#include "dfgc/error.hpp"
#include "dfgc/identity.hpp"
#include "fixtures.hpp"

using dfgc::Image;
namespace id = dfgc::identity;

namespace {

Image quadrants(double a, double b, double c, double d) {
  Image img(16, 16);
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 16; ++x) {
      const double v = y < 8 ? (x < 8 ? a : b) : (x < 8 ? c : d);
      for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = v;
    }
  }
  return img;
}

}  // namespace

TEST_CASE("toy embedding is unit norm and deterministic") {
  const Image x = fixtures::smooth_image(64, 64, 1);
  const auto e = id::toy_embed(x);
  CHECK(e.dimension() == 256);
  CHECK(id::cosine(e, e) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(e.norm == doctest::Approx(1.0));
  CHECK(e.values == id::toy_embed(x).values);
}

TEST_CASE("constant image yields a flagged zero vector") {
  const auto e = id::toy_embed(fixtures::constant_image(32, 32, 0.4));
  CHECK(e.degenerate);
  for (double v : e.values) CHECK(v == 0.0);
  id::ToyEmbedder provider;
  const auto ref = id::id_reference(std::vector{fixtures::smooth_image(32, 32, 2)}, "p", provider);
  const auto sim = id::id_similarity(fixtures::constant_image(32, 32, 0.4), ref, provider);
  CHECK(sim.degenerate);
  CHECK(sim.value == 0.0);
}

TEST_CASE("toy embedding ignores a global brightness offset") {
  const Image x = fixtures::smooth_image(64, 64, 5);
  Image shifted = x;
  for (double& v : shifted.data()) v += 0.1;
  const auto a = id::toy_embed(x);
  const auto b = id::toy_embed(shifted);
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(a.values[i] - b.values[i]) < 1e-12);
}

TEST_CASE("hand-computed cosine on quadrant images") {
  // Centred luma: (-0.3, -0.1, 0.1, 0.3) vs (0.3, -0.1, 0.1, -0.3), each over
  // 64 pixels: dot = 64 * (-0.16), norms^2 = 64 * 0.2 each, cosine = -0.8.
  id::ToyEmbedder provider;
  const auto ref = id::id_reference(std::vector{quadrants(0.8, 0.4, 0.6, 0.2)}, "q", provider);
  const auto sim = id::id_similarity(quadrants(0.2, 0.4, 0.6, 0.8), ref, provider);
  CHECK(std::abs(sim.value - (-0.8)) < 1e-12);
  CHECK_FALSE(sim.degenerate);
}

TEST_CASE("reference averaging") {
  id::ToyEmbedder provider;
  const Image x = fixtures::smooth_image(32, 32, 9);
  const auto single = id::id_reference(std::vector{x}, "a", provider);
  CHECK(single.n_refs == 1);
  CHECK(single.mean_embedding.values == provider.embed(x).values);
  const auto twice = id::id_reference(std::vector{x, x}, "a", provider);
  CHECK(twice.mean_embedding.values == provider.embed(x).values);

  std::vector<double> e1(4, 0.0), e2(4, 0.0);
  e1[0] = 1.0;
  e2[1] = 1.0;
  const std::vector vecs{id::EmbeddingVector::from_values(e1), id::EmbeddingVector::from_values(e2)};
  const auto ref = id::id_reference(vecs, "o");
  CHECK(ref.mean_embedding.norm == doctest::Approx(std::sqrt(2.0) / 2.0));

  CHECK_THROWS_AS(id::id_reference(std::vector<Image>{}, "e", provider), dfgc::Error);
}

TEST_CASE("similarity extremes and scale invariance") {
  id::ToyEmbedder provider;
  const Image x = fixtures::smooth_image(48, 48, 4);
  auto ref = id::id_reference(std::vector{x}, "x", provider);
  CHECK(id::id_similarity(x, ref, provider).value == doctest::Approx(1.0));

  std::vector<double> negated = ref.mean_embedding.values;
  for (double& v : negated) v = -v;
  const id::IdentityReference neg{"n", id::EmbeddingVector::from_values(negated), 1};
  CHECK(id::id_similarity(x, neg, provider).value == doctest::Approx(-1.0));

  const Image other = fixtures::smooth_image(48, 48, 8);
  const double base = id::id_similarity(other, ref, provider).value;
  std::vector<double> scaled = ref.mean_embedding.values;
  for (double& v : scaled) v *= 3.7;
  const id::IdentityReference big{"x", id::EmbeddingVector::from_values(scaled), 1};
  CHECK(id::id_similarity(other, big, provider).value == doctest::Approx(base).epsilon(1e-12));
}

TEST_CASE("dimension mismatch is a shape error") {
  id::ToyEmbedder provider;
  const id::IdentityReference small{"s", id::EmbeddingVector::from_values({1.0, 0.0}), 1};
  CHECK_THROWS_AS(id::id_similarity(fixtures::smooth_image(32, 32, 1), small, provider), dfgc::Error);
}

TEST_CASE("sidecar embeddings round-trip and back a provider") {
  fixtures::TempDir dir("sidecar");
  const Image a = fixtures::smooth_image(32, 32, 1);
  const Image b = fixtures::smooth_image(32, 32, 2);
  const std::vector vecs{id::toy_embed(a), id::toy_embed(b)};
  id::write_sidecar(dir / "id0.emb", vecs);
  const auto back = id::read_sidecar(dir / "id0.emb");
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 256; ++i) {
    CHECK(back[0].values[i] == doctest::Approx(vecs[0].values[i]).epsilon(1e-6));
  }

  id::SidecarProvider provider(256);
  provider.add(a, back[0]);
  provider.add(b, back[1]);
  const auto ref = id::id_reference(std::vector{a, b}, "id0", provider);
  id::ToyEmbedder toy;
  const auto toy_ref = id::id_reference(std::vector{a, b}, "id0", toy);
  CHECK(id::id_similarity(a, ref, provider).value ==
        doctest::Approx(id::id_similarity(a, toy_ref, toy).value).epsilon(1e-5));
  CHECK_THROWS_AS(provider.embed(fixtures::smooth_image(32, 32, 3)), dfgc::Error);
}
