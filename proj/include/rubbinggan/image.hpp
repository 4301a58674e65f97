#pragma once

// Glyph image type and pixel-level operations shared by the whole pipeline.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace rubbinggan {

enum class ValueRange { Byte, Unit, Symmetric };

inline const char* to_string(ValueRange r) {
  switch (r) {
    case ValueRange::Byte: return "byte";
    case ValueRange::Unit: return "unit";
    case ValueRange::Symmetric: return "symmetric";
  }
  return "?";
}

inline double range_lo(ValueRange r) {
  return r == ValueRange::Symmetric ? -1.0 : 0.0;
}
inline double range_hi(ValueRange r) {
  return r == ValueRange::Byte ? 255.0 : 1.0;
}

// H x W x C raster, interleaved channels, row-major. C is 3 everywhere in
// the pipeline; grayscale sources are replicated to 3 channels on load.
struct GlyphImage {
  int height = 0;
  int width = 0;
  int channels = 3;
  ValueRange range = ValueRange::Byte;
  std::vector<double> pixels;  // size = height*width*channels

  GlyphImage() = default;
  GlyphImage(int h, int w, int c, ValueRange r, double fill = 0.0)
      : height(h), width(w), channels(c), range(r),
        pixels(static_cast<size_t>(h) * w * c, fill) {
    if (h < 1 || w < 1 || c < 1)
      throw std::invalid_argument("GlyphImage: non-positive dimensions");
  }

  double& at(int y, int x, int c) {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  double at(int y, int x, int c) const {
    return pixels[(static_cast<size_t>(y) * width + x) * channels + c];
  }
  size_t size() const { return pixels.size(); }

  bool same_shape(const GlyphImage& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
};

struct PairedSample {
  GlyphImage source;  // standard font
  GlyphImage target;  // rubbing font
  std::string id;
};

enum class PairLayout { SourceLeft, SourceRight };

// Splits a side-by-side pair image (width == 2 * height) into its halves.
// Bit-exact: no pixel value is touched.
inline PairedSample split_pair(const GlyphImage& joined, PairLayout layout) {
  if (joined.width != 2 * joined.height)
    throw std::invalid_argument(
        "split_pair: expected width == 2*height, got " +
        std::to_string(joined.height) + "x" + std::to_string(joined.width));
  const int h = joined.height, half = joined.width / 2, c = joined.channels;
  GlyphImage left(h, half, c, joined.range), right(h, half, c, joined.range);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < half; ++x)
      for (int ch = 0; ch < c; ++ch) {
        left.at(y, x, ch) = joined.at(y, x, ch);
        right.at(y, x, ch) = joined.at(y, x + half, ch);
      }
  PairedSample s;
  if (layout == PairLayout::SourceLeft) {
    s.source = std::move(left);
    s.target = std::move(right);
  } else {
    s.source = std::move(right);
    s.target = std::move(left);
  }
  return s;
}

// Horizontal concatenation, the inverse of split_pair.
inline GlyphImage hconcat(const GlyphImage& left, const GlyphImage& right) {
  if (left.height != right.height || left.channels != right.channels)
    throw std::invalid_argument("hconcat: incompatible shapes");
  GlyphImage out(left.height, left.width + right.width, left.channels,
                 left.range);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int c = 0; c < out.channels; ++c)
        out.at(y, x, c) = x < left.width ? left.at(y, x, c)
                                         : right.at(y, x - left.width, c);
  return out;
}

// Bilinear resize with the half-pixel (align_corners=false) convention:
// source coordinate = (dst + 0.5) * scale - 0.5, clamped at the borders.
// The same convention is used for training-time preparation and for
// restoration inputs.
inline GlyphImage resize_bilinear(const GlyphImage& img, int out_h, int out_w) {
  if (out_h < 1 || out_w < 1)
    throw std::invalid_argument("resize_bilinear: target size must be >= 1");
  GlyphImage out(out_h, out_w, img.channels, img.range);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top =
            img.at(y0, x0, c) * (1 - wx) + img.at(y0, x1, c) * wx;
        const double bot =
            img.at(y1, x0, c) * (1 - wx) + img.at(y1, x1, c) * wx;
        out.at(y, x, c) = top * (1 - wy) + bot * wy;
      }
    }
  }
  return out;
}

// Affine remap between the declared value ranges.
inline GlyphImage normalize(const GlyphImage& img, ValueRange target) {
  GlyphImage out = img;
  if (img.range == target) return out;
  const double slo = range_lo(img.range), shi = range_hi(img.range);
  const double tlo = range_lo(target), thi = range_hi(target);
  const double scale = (thi - tlo) / (shi - slo);
  for (double& v : out.pixels) v = (v - slo) * scale + tlo;
  out.range = target;
  return out;
}

}  // namespace rubbinggan
