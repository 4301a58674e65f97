#pragma once

// Quantitative evaluation: style-similarity error over a test set,
// damage-mask extraction for incomplete characters, and image-set export
// for external FID tooling.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "rubbinggan/dataset.hpp"
#include "rubbinggan/image.hpp"
#include "rubbinggan/image_io.hpp"
#include "rubbinggan/training.hpp"

namespace rubbinggan {

struct StyleSimilarityReport {
  std::vector<std::pair<std::string, double>> per_image;
  double mean_error = 0.0;
};

struct DamageMask {
  int height = 0;
  int width = 0;
  std::vector<uint8_t> mask;  // row-major H x W, 1 = restored-region pixel
  int threshold = 253;

  bool at(int y, int x) const { return mask[static_cast<size_t>(y) * width + x] != 0; }
  int marked_count() const {
    int n = 0;
    for (uint8_t v : mask) n += v != 0;
    return n;
  }
};

// Mean squared per-pixel difference over all m = H*W*C elements.
// Inputs must be in unit range so magnitudes are comparable across runs.
inline double style_similarity_error(const GlyphImage& x_gen,
                                     const GlyphImage& y_real) {
  if (!x_gen.same_shape(y_real))
    throw std::invalid_argument("style_similarity_error: shape mismatch");
  if (x_gen.range != ValueRange::Unit || y_real.range != ValueRange::Unit)
    throw std::invalid_argument(
        "style_similarity_error: images must be in unit range");
  double acc = 0.0;
  for (size_t i = 0; i < x_gen.size(); ++i) {
    const double d = x_gen.pixels[i] - y_real.pixels[i];
    acc += d * d;
  }
  return acc / x_gen.size();
}

// Marks pixels where the generated glyph differs from the reversed
// incomplete glyph by more than the threshold (strict inequality).
// `generated` has white background / dark strokes; `incomplete` has black
// background / light strokes, so it is reversed (255 - v) first. Per-pixel
// channel differences are reduced by max before thresholding.
inline DamageMask damage_mask(const GlyphImage& generated,
                              const GlyphImage& incomplete,
                              int threshold = 253) {
  if (!generated.same_shape(incomplete))
    throw std::invalid_argument("damage_mask: shape mismatch");
  if (generated.range != ValueRange::Byte ||
      incomplete.range != ValueRange::Byte)
    throw std::invalid_argument("damage_mask: images must be in byte range");
  DamageMask m;
  m.height = generated.height;
  m.width = generated.width;
  m.threshold = threshold;
  m.mask.assign(static_cast<size_t>(m.height) * m.width, 0);
  for (int y = 0; y < m.height; ++y)
    for (int x = 0; x < m.width; ++x) {
      double diff = 0.0;
      for (int c = 0; c < generated.channels; ++c) {
        const double reversed = 255.0 - incomplete.at(y, x, c);
        diff = std::max(diff, std::abs(generated.at(y, x, c) - reversed));
      }
      if (diff > threshold)
        m.mask[static_cast<size_t>(y) * m.width + x] = 1;
    }
  return m;
}

// Copies the generated image with masked pixels painted pure blue.
inline GlyphImage render_mask_overlay(const GlyphImage& generated,
                                      const DamageMask& mask) {
  if (generated.height != mask.height || generated.width != mask.width)
    throw std::invalid_argument("render_mask_overlay: shape mismatch");
  GlyphImage out = generated;
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      if (mask.at(y, x)) {
        out.at(y, x, 0) = 0;
        out.at(y, x, 1) = 0;
        out.at(y, x, 2) = 255;
      }
  return out;
}

// Runs the generator over every manifest entry's source glyph. Inference
// uses eval-mode normalization, so results depend only on the checkpoint.
inline GlyphImage generate_glyph(Trainer& trainer, const GlyphImage& source) {
  const int size = trainer.config().image_size;
  GlyphImage prepared = normalize(resize_bilinear(source, size, size),
                                  ValueRange::Symmetric);
  Tensor out = trainer.generator().forward(to_tensor(prepared), false);
  GlyphImage img = to_image(out, ValueRange::Symmetric);
  // tanh output is already within [-1,1]
  return normalize(img, ValueRange::Byte);
}

// Writes one generated PNG per test sample, named <id>.png; returns the
// number of files written. The directory is the integration point for
// external FID tools.
inline size_t export_generated_set(Trainer& trainer,
                                   const std::filesystem::path& dataset_root,
                                   const DatasetManifest& manifest,
                                   const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (!std::filesystem::is_directory(out_dir))
    throw std::runtime_error("export_generated_set: cannot create " +
                             out_dir.string());
  size_t written = 0;
  for (const auto& entry : manifest.entries) {
    PairedSample s = load_pair(dataset_root, entry, manifest.pair_layout);
    GlyphImage gen = generate_glyph(trainer, s.source);
    save_png(gen, out_dir / (entry.id + ".png"));
    ++written;
  }
  return written;
}

// Style-similarity report over a paired test manifest.
inline StyleSimilarityReport evaluate_style_similarity(
    Trainer& trainer, const std::filesystem::path& dataset_root,
    const DatasetManifest& manifest) {
  StyleSimilarityReport report;
  const int size = trainer.config().image_size;
  double acc = 0.0;
  for (const auto& entry : manifest.entries) {
    PairedSample s = load_pair(dataset_root, entry, manifest.pair_layout);
    GlyphImage gen = normalize(generate_glyph(trainer, s.source),
                               ValueRange::Unit);
    GlyphImage target = normalize(resize_bilinear(s.target, size, size),
                                  ValueRange::Unit);
    const double err = style_similarity_error(gen, target);
    report.per_image.emplace_back(entry.id, err);
    acc += err;
  }
  report.mean_error =
      report.per_image.empty() ? 0.0 : acc / report.per_image.size();
  return report;
}

inline void write_report_csv(const StyleSimilarityReport& report,
                             const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report " + path.string());
  out.precision(17);
  out << "id,error\n";
  for (const auto& [id, err] : report.per_image) out << id << ',' << err << '\n';
  out << "mean," << report.mean_error << '\n';
}

}  // namespace rubbinggan
