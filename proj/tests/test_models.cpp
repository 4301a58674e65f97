#include <catch2/catch_amalgamated.hpp>

#include "rubbinggan/nets.hpp"

#include <random>

using namespace rubbinggan;

namespace {
Tensor random_input(int c, int size, uint64_t seed) {
  Tensor t(1, c, size, size);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : t.data) v = u(rng);
  return t;
}
}  // namespace

TEST_CASE("generator maps 64x64x3 to 64x64x3 within [-1,1]") {
  GeneratorSpec spec;
  spec.image_size = 64;
  spec.base_channels = 8;
  spec.max_channels = 32;
  UNetGenerator g(spec);
  g.init(1);
  Tensor y = g.forward(random_input(3, 64, 2), false);
  REQUIRE(y.c == 3);
  REQUIRE(y.h == 64);
  REQUIRE(y.w == 64);
  for (double v : y.data) {
    REQUIRE(v >= -1.0);
    REQUIRE(v <= 1.0);
  }
  REQUIRE_THROWS_AS(g.forward(Tensor(1, 3, 32, 32), false),
                    std::invalid_argument);
}

TEST_CASE("zero-weight generator outputs tanh(0) = 0") {
  GeneratorSpec spec;
  spec.image_size = 32;
  spec.base_channels = 4;
  spec.max_channels = 8;
  UNetGenerator g(spec);
  for (Param* p : g.params())
    std::fill(p->value.begin(), p->value.end(), 0.0);
  Tensor y = g.forward(random_input(3, 32, 3), false);
  for (double v : y.data) REQUIRE(v == 0.0);
}

TEST_CASE("generator forward is deterministic") {
  GeneratorSpec spec;
  spec.image_size = 32;
  spec.base_channels = 4;
  spec.max_channels = 16;
  UNetGenerator g(spec);
  g.init(5);
  Tensor x = random_input(3, 32, 4);
  Tensor a = g.forward(x, false);
  Tensor b = g.forward(x, false);
  REQUIRE(a.data == b.data);
}

TEST_CASE("ablating the outer skip changes the output") {
  GeneratorSpec spec;
  spec.image_size = 32;
  spec.base_channels = 4;
  spec.max_channels = 16;
  UNetGenerator g(spec);
  g.init(6);
  Tensor x = random_input(3, 32, 5);
  Tensor normal = g.forward(x, false);
  g.ablate_outer_skip = true;
  Tensor ablated = g.forward(x, false);
  REQUIRE(normal.data != ablated.data);
}

TEST_CASE("d1 consumes a 6-channel concatenation") {
  PatchDiscriminatorSpec spec;
  spec.base_channels = 8;
  PatchDiscriminator d1(spec);
  d1.init(7);
  Tensor a = random_input(3, 64, 6), b = random_input(3, 64, 7);
  Tensor cat = concat_channels(a, b);
  REQUIRE(cat.c == 6);
  Tensor s = d1.forward(cat, false);
  REQUIRE(s.c == 1);
  REQUIRE(s.h > 1);  // a patch map, not a scalar
  for (double v : s.data) {
    REQUIRE(v > 0.0);
    REQUIRE(v < 1.0);
  }
  REQUIRE_THROWS_AS(d1.forward(a, false), std::invalid_argument);
}

TEST_CASE("zero-weight d1 scores every patch 0.5") {
  PatchDiscriminatorSpec spec;
  spec.base_channels = 4;
  PatchDiscriminator d1(spec);
  for (Param* p : d1.params())
    if (!p->name.ends_with(".gamma"))
      std::fill(p->value.begin(), p->value.end(), 0.0);
    else
      std::fill(p->value.begin(), p->value.end(), 1.0);
  Tensor s = d1.forward(random_input(6, 32, 8), false);
  for (double v : s.data) REQUIRE(v == 0.5);
}

TEST_CASE("default 5-layer stack on 256x256 gives a 30x30 score map") {
  // receptive-field arithmetic oracle over the documented schedule:
  // three k4 s2 p1 convs then two k4 s1 p1 convs
  auto conv_out = [](int s, int k, int st, int p) {
    return (s + 2 * p - k) / st + 1;
  };
  int s = 256;
  for (int i = 0; i < 3; ++i) s = conv_out(s, 4, 2, 1);
  s = conv_out(s, 4, 1, 1);
  s = conv_out(s, 4, 1, 1);
  REQUIRE(s == 30);
  REQUIRE(PatchDiscriminator::score_map_size(256) == 30);

  PatchDiscriminatorSpec spec;
  spec.base_channels = 2;
  PatchDiscriminator d1(spec);
  d1.init(9);
  Tensor out = d1.forward(random_input(6, 256, 9), false);
  REQUIRE(out.h == 30);
  REQUIRE(out.w == 30);
}

TEST_CASE("d2 reconstructs the input shape") {
  AutoEncoderDiscriminatorSpec spec;
  spec.image_size = 64;
  spec.base_channels = 8;
  spec.max_channels = 16;
  AutoEncoderDiscriminator d2(spec);
  d2.init(10);
  Tensor v = random_input(3, 64, 10);
  Tensor r = d2.forward(v, false);
  REQUIRE(r.c == 3);
  REQUIRE(r.h == 64);
  REQUIRE(r.w == 64);
  REQUIRE_THROWS_AS(d2.forward(random_input(3, 32, 1), false),
                    std::invalid_argument);
}

TEST_CASE("zero-weight d2 outputs tanh(0) = 0") {
  AutoEncoderDiscriminatorSpec spec;
  spec.image_size = 32;
  spec.base_channels = 4;
  AutoEncoderDiscriminator d2(spec);
  for (Param* p : d2.params())
    std::fill(p->value.begin(), p->value.end(), 0.0);
  Tensor r = d2.forward(random_input(3, 32, 11), false);
  for (double v : r.data) REQUIRE(v == 0.0);
}

TEST_CASE("d2 embedding length is the configured dimension") {
  AutoEncoderDiscriminatorSpec spec;
  spec.image_size = 32;
  spec.base_channels = 4;
  spec.embedding_dim = 64;
  AutoEncoderDiscriminator d2(spec);
  d2.init(12);
  for (uint64_t seed : {21, 22, 23}) {
    Tensor z = d2.encode(random_input(3, 32, seed), false);
    REQUIRE(z.size() == 64);
  }
}

TEST_CASE("network specs serialize to JSON and back") {
  GeneratorSpec g;
  g.image_size = 64;
  g.base_channels = 16;
  GeneratorSpec g2 = GeneratorSpec::from_json(g.to_json());
  REQUIRE(g2.image_size == 64);
  REQUIRE(g2.base_channels == 16);

  PatchDiscriminatorSpec d1;
  d1.num_strided = 2;
  REQUIRE(PatchDiscriminatorSpec::from_json(d1.to_json()).num_strided == 2);

  AutoEncoderDiscriminatorSpec d2;
  d2.embedding_dim = 32;
  REQUIRE(AutoEncoderDiscriminatorSpec::from_json(d2.to_json()).embedding_dim ==
          32);
}

TEST_CASE("shape contracts hold at reduced 64x64 and full 256 for d1 map") {
  REQUIRE(PatchDiscriminator::score_map_size(64) == 6);
  REQUIRE(PatchDiscriminatorSpec::auto_strided(8) == 1);
  REQUIRE(PatchDiscriminatorSpec::auto_strided(64) == 3);
  REQUIRE(PatchDiscriminatorSpec::auto_strided(256) == 3);
}
