#include <catch2/catch_amalgamated.hpp>

#include "rubbinggan/evaluation.hpp"

#include <random>
#include <set>

#include "helpers.hpp"

using namespace rubbinggan;

namespace {
TrainConfig eval_config() {
  TrainConfig cfg;
  cfg.image_size = 32;
  cfg.g_base_channels = 4;
  cfg.g_max_channels = 8;
  cfg.d1_base_channels = 4;
  cfg.d2_base_channels = 4;
  cfg.d2_embedding_dim = 8;
  cfg.seed = 11;
  return cfg;
}
}  // namespace

TEST_CASE("style_similarity_error matches a scalar-loop oracle") {
  for (uint64_t seed : {1, 2, 3}) {
    GlyphImage a = testutil::random_unit_image(16, 16, seed);
    GlyphImage b = testutil::random_unit_image(16, 16, seed + 100);
    double oracle = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
      const double d = a.pixels[i] - b.pixels[i];
      oracle += d * d;
    }
    oracle /= 16.0 * 16.0 * 3.0;
    REQUIRE_THAT(style_similarity_error(a, b),
                 Catch::Matchers::WithinAbs(oracle, 1e-12));
  }
}

TEST_CASE("style_similarity_error identity, symmetry and range checks") {
  GlyphImage a = testutil::random_unit_image(8, 8, 4);
  GlyphImage b = testutil::random_unit_image(8, 8, 5);
  REQUIRE(style_similarity_error(a, a) == 0.0);
  REQUIRE(style_similarity_error(a, b) == style_similarity_error(b, a));
  REQUIRE(style_similarity_error(a, b) >= 0.0);

  GlyphImage wrong = testutil::random_unit_image(8, 4, 6);
  REQUIRE_THROWS_AS(style_similarity_error(a, wrong), std::invalid_argument);
  GlyphImage byte = normalize(a, ValueRange::Byte);
  REQUIRE_THROWS_AS(style_similarity_error(a, byte), std::invalid_argument);
}

TEST_CASE("damage_mask is empty when the images agree") {
  GlyphImage gen = testutil::synth_glyph(32, 7);
  GlyphImage incomplete = gen;
  for (double& v : incomplete.pixels) v = 255.0 - v;  // exact reversal
  DamageMask m = damage_mask(gen, incomplete);
  REQUIRE(m.marked_count() == 0);
}

TEST_CASE("damage_mask threshold boundary is strict") {
  // one pixel exactly at the threshold must NOT be marked; one past it must
  GlyphImage gen(4, 4, 3, ValueRange::Byte, 255.0);
  GlyphImage incomplete(4, 4, 3, ValueRange::Byte, 0.0);  // reversed = 255
  incomplete.at(1, 1, 0) = 253.0;  // reversed 2, |255 - 2| = 253 == threshold
  incomplete.at(2, 2, 0) = 254.0;  // reversed 1, |255 - 1| = 254 > threshold
  DamageMask m = damage_mask(gen, incomplete);
  REQUIRE_FALSE(m.at(1, 1));
  REQUIRE(m.at(2, 2));
  REQUIRE(m.marked_count() == 1);
}

TEST_CASE("damage_mask recovers a planted hole exactly") {
  std::mt19937_64 rng(8);
  GlyphImage gen = testutil::synth_glyph(32, 9);
  GlyphImage incomplete = gen;
  for (double& v : incomplete.pixels) v = 255.0 - v;
  // plant a hole: generator says solid ink (0), incomplete says background
  std::set<std::pair<int, int>> hole;
  while (hole.size() < 12) {
    const int y = static_cast<int>(rng() % 32), x = static_cast<int>(rng() % 32);
    hole.insert({y, x});
    for (int c = 0; c < 3; ++c) {
      gen.at(y, x, c) = 0.0;            // restored stroke
      incomplete.at(y, x, c) = 0.0;     // missing in the rubbing (reversed 255)
    }
  }
  DamageMask m = damage_mask(gen, incomplete);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 32; ++x)
      REQUIRE(m.at(y, x) == hole.count({y, x}));
}

TEST_CASE("mask overlay paints marked pixels pure blue and nothing else") {
  GlyphImage gen = testutil::synth_glyph(16, 10);
  DamageMask m;
  m.height = m.width = 16;
  m.mask.assign(256, 0);
  m.mask[3 * 16 + 5] = 1;
  GlyphImage overlay = render_mask_overlay(gen, m);
  REQUIRE(overlay.at(3, 5, 0) == 0.0);
  REQUIRE(overlay.at(3, 5, 1) == 0.0);
  REQUIRE(overlay.at(3, 5, 2) == 255.0);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x)
      if (!(y == 3 && x == 5))
        for (int c = 0; c < 3; ++c)
          REQUIRE(overlay.at(y, x, c) == gen.at(y, x, c));
}

TEST_CASE("generate_glyph is deterministic and returns byte range") {
  Trainer t(eval_config());
  GlyphImage src = testutil::synth_glyph(64, 12);
  GlyphImage a = generate_glyph(t, src);
  GlyphImage b = generate_glyph(t, src);
  REQUIRE(a.pixels == b.pixels);
  REQUIRE(a.height == 32);
  REQUIRE(a.range == ValueRange::Byte);
  for (double v : a.pixels) {
    REQUIRE(v >= 0.0);
    REQUIRE(v <= 255.0);
  }
}

TEST_CASE("export_generated_set writes one PNG per test entry") {
  testutil::TempDir tmp("export");
  testutil::write_fixture_dataset(tmp.path, 1, 4, 0, 32);
  DatasetManifest test = load_manifest(tmp.path, Split::Test);
  Trainer t(eval_config());
  const auto out = tmp.path / "generated";
  REQUIRE(export_generated_set(t, tmp.path, test, out) == 4);
  for (const auto& e : test.entries) {
    REQUIRE(std::filesystem::exists(out / (e.id + ".png")));
    GlyphImage img = load_png(out / (e.id + ".png"));
    REQUIRE(img.height == 32);
    REQUIRE(img.width == 32);
  }
}

TEST_CASE("export on an empty manifest writes nothing") {
  testutil::TempDir tmp("export0");
  DatasetManifest empty;
  Trainer t(eval_config());
  REQUIRE(export_generated_set(t, tmp.path, empty, tmp.path / "gen") == 0);
}

TEST_CASE("evaluate_style_similarity reports per-image and mean errors") {
  testutil::TempDir tmp("simreport");
  testutil::write_fixture_dataset(tmp.path, 1, 3, 0, 32);
  DatasetManifest test = load_manifest(tmp.path, Split::Test);
  Trainer t(eval_config());
  StyleSimilarityReport r = evaluate_style_similarity(t, tmp.path, test);
  REQUIRE(r.per_image.size() == 3);
  double acc = 0.0;
  for (const auto& [id, err] : r.per_image) {
    REQUIRE(err >= 0.0);
    REQUIRE(err <= 1.0);  // unit-range MSE is bounded by 1
    acc += err;
  }
  REQUIRE_THAT(r.mean_error, Catch::Matchers::WithinAbs(acc / 3.0, 1e-15));

  write_report_csv(r, tmp.path / "report.csv");
  std::ifstream in(tmp.path / "report.csv");
  std::string line;
  std::getline(in, line);
  REQUIRE(line == "id,error");
  int rows = 0;
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  REQUIRE(rows == 4);  // 3 entries + mean
}
