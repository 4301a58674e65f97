#pragma once

// PNG load/save. OpenCV imgcodecs does the codec work; everything is
// converted to/from the RGB GlyphImage representation at this boundary.

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>

#include "rubbinggan/image.hpp"

namespace rubbinggan {

// Loads a PNG as a byte-range RGB GlyphImage. Grayscale files are
// replicated to 3 channels; an alpha channel, if present, is dropped.
inline GlyphImage load_png(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty())
    throw std::runtime_error("load_png: cannot read " + path.string());
  GlyphImage img(m.rows, m.cols, 3, ValueRange::Byte);
  const int ch = m.channels();
  for (int y = 0; y < m.rows; ++y) {
    const uint8_t* row = m.ptr<uint8_t>(y);
    for (int x = 0; x < m.cols; ++x) {
      const uint8_t* p = row + static_cast<size_t>(x) * ch;
      if (ch == 1) {
        img.at(y, x, 0) = img.at(y, x, 1) = img.at(y, x, 2) = p[0];
      } else {
        // OpenCV stores BGR(A)
        img.at(y, x, 0) = p[2];
        img.at(y, x, 1) = p[1];
        img.at(y, x, 2) = p[0];
      }
    }
  }
  return img;
}

// Writes a byte-range image as 8-bit RGB PNG. Values are rounded and
// clamped to [0,255].
inline void save_png(const GlyphImage& img, const std::filesystem::path& path) {
  if (img.range != ValueRange::Byte)
    throw std::invalid_argument("save_png: image must be in byte range");
  cv::Mat m(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    uint8_t* row = m.ptr<uint8_t>(y);
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double v = std::round(img.at(y, x, c));
        row[static_cast<size_t>(x) * 3 + (2 - c)] =
            static_cast<uint8_t>(std::clamp(v, 0.0, 255.0));
      }
    }
  }
  if (!cv::imwrite(path.string(), m))
    throw std::runtime_error("save_png: cannot write " + path.string());
}

}  // namespace rubbinggan
