#pragma once

// Shared test fixtures: temp directories, synthetic glyph images and
// small on-disk datasets.

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "rubbinggan/dataset.hpp"
#include "rubbinggan/image.hpp"
#include "rubbinggan/image_io.hpp"

namespace testutil {

inline const char* kTestFont = "/usr/share/fonts/truetype/dejavu/DejaVuSans.ttf";

struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("rubbinggan_test_" + tag + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path);
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
};

// Deterministic glyph-like raster: a few dark strokes on white.
inline rubbinggan::GlyphImage synth_glyph(int size, uint64_t seed,
                                          double ink = 0.0) {
  using namespace rubbinggan;
  GlyphImage img(size, size, 3, ValueRange::Byte, 255.0);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pos(0, size - 1);
  std::uniform_int_distribution<int> len(size / 4, size / 2);
  for (int s = 0; s < 4; ++s) {
    const bool horiz = rng() & 1;
    const int y0 = pos(rng), x0 = pos(rng), l = len(rng);
    const int thick = 1 + size / 16;
    for (int t = 0; t < thick; ++t)
      for (int i = 0; i < l; ++i) {
        const int y = horiz ? y0 + t : y0 + i;
        const int x = horiz ? x0 + i : x0 + t;
        if (y < size && x < size)
          for (int c = 0; c < 3; ++c) img.at(y, x, c) = ink;
      }
  }
  return img;
}

inline rubbinggan::GlyphImage random_unit_image(int h, int w, uint64_t seed) {
  using namespace rubbinggan;
  GlyphImage img(h, w, 3, ValueRange::Unit);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (double& v : img.pixels) v = u(rng);
  return img;
}

// Writes a dataset fixture: train/ and test/ hold joined pairs of height
// `size` (source = standard glyph, target = a shifted darker variant),
// incomplete/ holds single glyphs with black background.
inline void write_fixture_dataset(const std::filesystem::path& root,
                                  int n_train, int n_test, int n_incomplete,
                                  int size = 64) {
  using namespace rubbinggan;
  namespace fs = std::filesystem;
  fs::create_directories(root / "train");
  fs::create_directories(root / "test");
  fs::create_directories(root / "incomplete");
  auto make_pair = [size](uint64_t seed) {
    GlyphImage src = synth_glyph(size, seed, 0.0);
    GlyphImage tgt = synth_glyph(size, seed, 60.0);  // same strokes, lighter ink
    return hconcat(src, tgt);
  };
  char name[32];
  for (int i = 0; i < n_train; ++i) {
    std::snprintf(name, sizeof name, "tr%03d.png", i);
    save_png(make_pair(100 + i), root / "train" / name);
  }
  for (int i = 0; i < n_test; ++i) {
    std::snprintf(name, sizeof name, "te%03d.png", i);
    save_png(make_pair(1000 + i), root / "test" / name);
  }
  for (int i = 0; i < n_incomplete; ++i) {
    std::snprintf(name, sizeof name, "in%03d.png", i);
    GlyphImage g = synth_glyph(size, 2000 + i, 0.0);
    // incomplete characters have black background / light strokes
    for (double& v : g.pixels) v = 255.0 - v;
    save_png(g, root / "incomplete" / name);
  }
}

}  // namespace testutil
