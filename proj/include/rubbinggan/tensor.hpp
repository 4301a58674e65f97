#pragma once

// Minimal dense NCHW tensor of doubles plus the im2col/col2im plumbing
// the convolution layers are built on. All heavy math is funneled through
// Eigen matrix products.

#include <Eigen/Dense>

#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "rubbinggan/image.hpp"

namespace rubbinggan {

struct Tensor {
  // shape = {N, C, H, W}; scalars/vectors use fewer dims with size 1 padding
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, double fill = 0.0)
      : n(n_), c(c_), h(h_), w(w_),
        data(static_cast<size_t>(n_) * c_ * h_ * w_, fill) {}

  size_t size() const { return data.size(); }
  size_t plane() const { return static_cast<size_t>(h) * w; }
  size_t sample_size() const { return static_cast<size_t>(c) * h * w; }

  double& at(int in, int ic, int iy, int ix) {
    return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }
  double at(int in, int ic, int iy, int ix) const {
    return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
  }

  bool same_shape(const Tensor& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  std::string shape_str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" +
           std::to_string(h) + "x" + std::to_string(w);
  }

  void zero() { std::fill(data.begin(), data.end(), 0.0); }

  Tensor& operator+=(const Tensor& o) {
    for (size_t i = 0; i < data.size(); ++i) data[i] += o.data[i];
    return *this;
  }
  Tensor& operator*=(double s) {
    for (double& v : data) v *= s;
    return *this;
  }
};

using MatMap = Eigen::Map<
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstMatMap = Eigen::Map<const
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

inline int conv_out_size(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

// Unpacks one sample (C x H x W) into a [C*kh*kw, oh*ow] column matrix.
inline void im2col(const double* src, int c, int h, int w, int kh, int kw,
                   int stride, int pad, double* col) {
  const int oh = conv_out_size(h, kh, stride, pad);
  const int ow = conv_out_size(w, kw, stride, pad);
  const size_t ospatial = static_cast<size_t>(oh) * ow;
  for (int ic = 0; ic < c; ++ic)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        double* dst = col + ((static_cast<size_t>(ic) * kh + ky) * kw + kx) *
                                ospatial;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            std::fill(dst + static_cast<size_t>(oy) * ow,
                      dst + static_cast<size_t>(oy + 1) * ow, 0.0);
            continue;
          }
          const double* srow = src + (static_cast<size_t>(ic) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            dst[static_cast<size_t>(oy) * ow + ox] =
                (ix < 0 || ix >= w) ? 0.0 : srow[ix];
          }
        }
      }
}

// Scatter-adds a column matrix back into a C x H x W sample (the adjoint
// of im2col). dst must be pre-zeroed by the caller.
inline void col2im(const double* col, int c, int h, int w, int kh, int kw,
                   int stride, int pad, double* dst) {
  const int oh = conv_out_size(h, kh, stride, pad);
  const int ow = conv_out_size(w, kw, stride, pad);
  const size_t ospatial = static_cast<size_t>(oh) * ow;
  for (int ic = 0; ic < c; ++ic)
    for (int ky = 0; ky < kh; ++ky)
      for (int kx = 0; kx < kw; ++kx) {
        const double* src = col + ((static_cast<size_t>(ic) * kh + ky) * kw +
                                   kx) * ospatial;
        for (int oy = 0; oy < oh; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) continue;
          double* drow = dst + (static_cast<size_t>(ic) * h + iy) * w;
          for (int ox = 0; ox < ow; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < w)
              drow[ix] += src[static_cast<size_t>(oy) * ow + ox];
          }
        }
      }
}

// GlyphImage (HWC) -> single-sample tensor (1CHW).
inline Tensor to_tensor(const GlyphImage& img) {
  Tensor t(1, img.channels, img.height, img.width);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c)
        t.at(0, c, y, x) = img.at(y, x, c);
  return t;
}

inline GlyphImage to_image(const Tensor& t, ValueRange range, int sample = 0) {
  GlyphImage img(t.h, t.w, t.c, range);
  for (int y = 0; y < t.h; ++y)
    for (int x = 0; x < t.w; ++x)
      for (int c = 0; c < t.c; ++c)
        img.at(y, x, c) = t.at(sample, c, y, x);
  return img;
}

// Stacks single-sample tensors along N.
inline Tensor stack(const std::vector<Tensor>& samples) {
  if (samples.empty()) throw std::invalid_argument("stack: empty batch");
  Tensor out(static_cast<int>(samples.size()), samples[0].c, samples[0].h,
             samples[0].w);
  for (size_t i = 0; i < samples.size(); ++i) {
    if (!samples[i].same_shape(samples[0]))
      throw std::invalid_argument("stack: mismatched sample shapes");
    std::copy(samples[i].data.begin(), samples[i].data.end(),
              out.data.begin() + i * samples[0].size());
  }
  return out;
}

// Channel concatenation of two equally-sized batches (used for the
// conditional discriminator input).
inline Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w)
    throw std::invalid_argument("concat_channels: shape mismatch " +
                                a.shape_str() + " vs " + b.shape_str());
  Tensor out(a.n, a.c + b.c, a.h, a.w);
  for (int in = 0; in < a.n; ++in) {
    std::copy(a.data.begin() + in * a.sample_size(),
              a.data.begin() + (in + 1) * a.sample_size(),
              out.data.begin() + in * out.sample_size());
    std::copy(b.data.begin() + in * b.sample_size(),
              b.data.begin() + (in + 1) * b.sample_size(),
              out.data.begin() + in * out.sample_size() + a.sample_size());
  }
  return out;
}

}  // namespace rubbinggan
