#pragma once

// Differentiable layers with explicit forward/backward passes. Each layer
// caches what its backward pass needs; backward accumulates parameter
// gradients and returns the input gradient. Everything runs on a single
// thread so training is bit-deterministic.

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rubbinggan/tensor.hpp"

namespace rubbinggan {

struct Param {
  std::string name;
  std::vector<double> value;
  std::vector<double> grad;

  explicit Param(std::string n, size_t size)
      : name(std::move(n)), value(size, 0.0), grad(size, 0.0) {}
  void zero_grad() { std::fill(grad.begin(), grad.end(), 0.0); }
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual std::vector<Param*> params() { return {}; }
  // Persistent non-trainable state (batch-norm running stats).
  virtual std::vector<std::vector<double>*> buffers() { return {}; }
};

class Conv2d : public Layer {
 public:
  Conv2d(std::string name, int in_c, int out_c, int kernel, int stride,
         int pad)
      : in_c_(in_c), out_c_(out_c), k_(kernel), s_(stride), p_(pad),
        weight_(name + ".weight",
                static_cast<size_t>(out_c) * in_c * kernel * kernel),
        bias_(name + ".bias", out_c) {}

  Tensor forward(const Tensor& x, bool train) override {
    if (x.c != in_c_)
      throw std::invalid_argument("Conv2d: expected " +
                                  std::to_string(in_c_) + " channels, got " +
                                  x.shape_str());
    if (train) x_ = x; else x_ = Tensor();
    shape_ = {x.n, x.c, x.h, x.w};
    const int oh = conv_out_size(x.h, k_, s_, p_);
    const int ow = conv_out_size(x.w, k_, s_, p_);
    Tensor y(x.n, out_c_, oh, ow);
    const int cols_rows = in_c_ * k_ * k_;
    const size_t ospatial = static_cast<size_t>(oh) * ow;
    std::vector<double> col(static_cast<size_t>(cols_rows) * ospatial);
    ConstMatMap W(weight_.value.data(), out_c_, cols_rows);
    for (int in = 0; in < x.n; ++in) {
      im2col(x.data.data() + in * x.sample_size(), in_c_, x.h, x.w, k_, k_,
             s_, p_, col.data());
      ConstMatMap C(col.data(), cols_rows, ospatial);
      MatMap Y(y.data.data() + in * y.sample_size(), out_c_, ospatial);
      Y.noalias() = W * C;
      for (int oc = 0; oc < out_c_; ++oc)
        Y.row(oc).array() += bias_.value[oc];
    }
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    const auto [n, c, h, w] = shape_;
    const int oh = dy.h, ow = dy.w;
    const int cols_rows = in_c_ * k_ * k_;
    const size_t ospatial = static_cast<size_t>(oh) * ow;
    Tensor dx(n, c, h, w);
    std::vector<double> col(static_cast<size_t>(cols_rows) * ospatial);
    std::vector<double> dcol(col.size());
    ConstMatMap W(weight_.value.data(), out_c_, cols_rows);
    MatMap dW(weight_.grad.data(), out_c_, cols_rows);
    for (int in = 0; in < n; ++in) {
      im2col(x_.data.data() + in * x_.sample_size(), in_c_, h, w, k_, k_, s_,
             p_, col.data());
      ConstMatMap C(col.data(), cols_rows, ospatial);
      ConstMatMap dY(dy.data.data() + in * dy.sample_size(), out_c_, ospatial);
      dW.noalias() += dY * C.transpose();
      for (int oc = 0; oc < out_c_; ++oc) bias_.grad[oc] += dY.row(oc).sum();
      MatMap dC(dcol.data(), cols_rows, ospatial);
      dC.noalias() = W.transpose() * dY;
      col2im(dcol.data(), in_c_, h, w, k_, k_, s_, p_,
             dx.data.data() + in * dx.sample_size());
    }
    return dx;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }

  int in_channels() const { return in_c_; }
  int out_channels() const { return out_c_; }

 private:
  int in_c_, out_c_, k_, s_, p_;
  Param weight_, bias_;
  Tensor x_;
  std::array<int, 4> shape_{};
};

class ConvTranspose2d : public Layer {
 public:
  ConvTranspose2d(std::string name, int in_c, int out_c, int kernel,
                  int stride, int pad)
      : in_c_(in_c), out_c_(out_c), k_(kernel), s_(stride), p_(pad),
        weight_(name + ".weight",
                static_cast<size_t>(in_c) * out_c * kernel * kernel),
        bias_(name + ".bias", out_c) {}

  Tensor forward(const Tensor& x, bool train) override {
    if (x.c != in_c_)
      throw std::invalid_argument("ConvTranspose2d: expected " +
                                  std::to_string(in_c_) + " channels, got " +
                                  x.shape_str());
    if (train) x_ = x; else x_ = Tensor();
    const int oh = (x.h - 1) * s_ - 2 * p_ + k_;
    const int ow = (x.w - 1) * s_ - 2 * p_ + k_;
    out_shape_ = {x.n, out_c_, oh, ow};
    Tensor y(x.n, out_c_, oh, ow);
    const int cols_rows = out_c_ * k_ * k_;
    const size_t ispatial = static_cast<size_t>(x.h) * x.w;
    std::vector<double> col(static_cast<size_t>(cols_rows) * ispatial);
    // weight stored as [in_c, out_c*k*k]
    ConstMatMap W(weight_.value.data(), in_c_, cols_rows);
    for (int in = 0; in < x.n; ++in) {
      ConstMatMap X(x.data.data() + in * x.sample_size(), in_c_, ispatial);
      MatMap C(col.data(), cols_rows, ispatial);
      C.noalias() = W.transpose() * X;
      double* dst = y.data.data() + in * y.sample_size();
      col2im(col.data(), out_c_, oh, ow, k_, k_, s_, p_, dst);
      for (int oc = 0; oc < out_c_; ++oc) {
        double* plane = dst + static_cast<size_t>(oc) * oh * ow;
        for (size_t i = 0; i < static_cast<size_t>(oh) * ow; ++i)
          plane[i] += bias_.value[oc];
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    const int n = x_.n, h = x_.h, w = x_.w;
    const int cols_rows = out_c_ * k_ * k_;
    const size_t ispatial = static_cast<size_t>(h) * w;
    Tensor dx(n, in_c_, h, w);
    std::vector<double> dcol(static_cast<size_t>(cols_rows) * ispatial);
    ConstMatMap W(weight_.value.data(), in_c_, cols_rows);
    MatMap dW(weight_.grad.data(), in_c_, cols_rows);
    for (int in = 0; in < n; ++in) {
      im2col(dy.data.data() + in * dy.sample_size(), out_c_, dy.h, dy.w, k_,
             k_, s_, p_, dcol.data());
      ConstMatMap dC(dcol.data(), cols_rows, ispatial);
      ConstMatMap X(x_.data.data() + in * x_.sample_size(), in_c_, ispatial);
      dW.noalias() += X * dC.transpose();
      MatMap dX(dx.data.data() + in * dx.sample_size(), in_c_, ispatial);
      dX.noalias() = W * dC;
      const double* dsrc = dy.data.data() + in * dy.sample_size();
      for (int oc = 0; oc < out_c_; ++oc) {
        const double* plane = dsrc + static_cast<size_t>(oc) * dy.plane();
        for (size_t i = 0; i < dy.plane(); ++i) bias_.grad[oc] += plane[i];
      }
    }
    return dx;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }

 private:
  int in_c_, out_c_, k_, s_, p_;
  Param weight_, bias_;
  Tensor x_;
  std::array<int, 4> out_shape_{};
};

class BatchNorm2d : public Layer {
 public:
  explicit BatchNorm2d(std::string name, int channels, double eps = 1e-5,
                       double momentum = 0.1)
      : c_(channels), eps_(eps), momentum_(momentum),
        gamma_(name + ".gamma", channels), beta_(name + ".beta", channels),
        running_mean_(channels, 0.0), running_var_(channels, 1.0) {
    std::fill(gamma_.value.begin(), gamma_.value.end(), 1.0);
  }

  Tensor forward(const Tensor& x, bool train) override {
    Tensor y = x;
    const size_t plane = x.plane();
    const double m = static_cast<double>(x.n) * plane;
    if (train) {
      xhat_ = Tensor(x.n, x.c, x.h, x.w);
      invstd_.assign(c_, 0.0);
      for (int ic = 0; ic < c_; ++ic) {
        double mean = 0.0, var = 0.0;
        for (int in = 0; in < x.n; ++in) {
          const double* p = x.data.data() + in * x.sample_size() + ic * plane;
          for (size_t i = 0; i < plane; ++i) mean += p[i];
        }
        mean /= m;
        for (int in = 0; in < x.n; ++in) {
          const double* p = x.data.data() + in * x.sample_size() + ic * plane;
          for (size_t i = 0; i < plane; ++i)
            var += (p[i] - mean) * (p[i] - mean);
        }
        var /= m;
        running_mean_[ic] =
            (1 - momentum_) * running_mean_[ic] + momentum_ * mean;
        running_var_[ic] = (1 - momentum_) * running_var_[ic] + momentum_ * var;
        const double inv = 1.0 / std::sqrt(var + eps_);
        invstd_[ic] = inv;
        for (int in = 0; in < x.n; ++in) {
          const size_t off = in * x.sample_size() + ic * plane;
          for (size_t i = 0; i < plane; ++i) {
            const double xh = (x.data[off + i] - mean) * inv;
            xhat_.data[off + i] = xh;
            y.data[off + i] = gamma_.value[ic] * xh + beta_.value[ic];
          }
        }
      }
    } else {
      for (int ic = 0; ic < c_; ++ic) {
        const double inv = 1.0 / std::sqrt(running_var_[ic] + eps_);
        for (int in = 0; in < x.n; ++in) {
          const size_t off = in * x.sample_size() + ic * plane;
          for (size_t i = 0; i < plane; ++i)
            y.data[off + i] = gamma_.value[ic] *
                                  (x.data[off + i] - running_mean_[ic]) * inv +
                              beta_.value[ic];
        }
      }
    }
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    Tensor dx(dy.n, dy.c, dy.h, dy.w);
    const size_t plane = dy.plane();
    const double m = static_cast<double>(dy.n) * plane;
    for (int ic = 0; ic < c_; ++ic) {
      double sum_dy = 0.0, sum_dy_xhat = 0.0;
      for (int in = 0; in < dy.n; ++in) {
        const size_t off = in * dy.sample_size() + ic * plane;
        for (size_t i = 0; i < plane; ++i) {
          sum_dy += dy.data[off + i];
          sum_dy_xhat += dy.data[off + i] * xhat_.data[off + i];
        }
      }
      gamma_.grad[ic] += sum_dy_xhat;
      beta_.grad[ic] += sum_dy;
      const double g = gamma_.value[ic], inv = invstd_[ic];
      for (int in = 0; in < dy.n; ++in) {
        const size_t off = in * dy.sample_size() + ic * plane;
        for (size_t i = 0; i < plane; ++i)
          dx.data[off + i] =
              g * inv / m *
              (m * dy.data[off + i] - sum_dy -
               xhat_.data[off + i] * sum_dy_xhat);
      }
    }
    return dx;
  }

  std::vector<Param*> params() override { return {&gamma_, &beta_}; }
  std::vector<std::vector<double>*> buffers() override {
    return {&running_mean_, &running_var_};
  }

 private:
  int c_;
  double eps_, momentum_;
  Param gamma_, beta_;
  std::vector<double> running_mean_, running_var_;
  Tensor xhat_;
  std::vector<double> invstd_;
};

class LeakyReLU : public Layer {
 public:
  explicit LeakyReLU(double slope = 0.2) : slope_(slope) {}
  Tensor forward(const Tensor& x, bool) override {
    x_ = x;
    Tensor y = x;
    for (double& v : y.data) v = v >= 0 ? v : slope_ * v;
    return y;
  }
  Tensor backward(const Tensor& dy) override {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.data.size(); ++i)
      if (x_.data[i] < 0) dx.data[i] *= slope_;
    return dx;
  }

 private:
  double slope_;
  Tensor x_;
};

class ReLU : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    x_ = x;
    Tensor y = x;
    for (double& v : y.data) v = v > 0 ? v : 0.0;
    return y;
  }
  Tensor backward(const Tensor& dy) override {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.data.size(); ++i)
      if (x_.data[i] <= 0) dx.data[i] = 0.0;
    return dx;
  }

 private:
  Tensor x_;
};

class Tanh : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    y_ = x;
    for (double& v : y_.data) v = std::tanh(v);
    return y_;
  }
  Tensor backward(const Tensor& dy) override {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.data.size(); ++i)
      dx.data[i] *= 1.0 - y_.data[i] * y_.data[i];
    return dx;
  }

 private:
  Tensor y_;
};

class Sigmoid : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    y_ = x;
    for (double& v : y_.data) v = 1.0 / (1.0 + std::exp(-v));
    return y_;
  }
  Tensor backward(const Tensor& dy) override {
    Tensor dx = dy;
    for (size_t i = 0; i < dx.data.size(); ++i)
      dx.data[i] *= y_.data[i] * (1.0 - y_.data[i]);
    return dx;
  }

 private:
  Tensor y_;
};

// Fully connected layer over flattened samples; output is N x out x 1 x 1.
class Linear : public Layer {
 public:
  Linear(std::string name, int in_features, int out_features)
      : in_(in_features), out_(out_features),
        weight_(name + ".weight",
                static_cast<size_t>(out_features) * in_features),
        bias_(name + ".bias", out_features) {}

  Tensor forward(const Tensor& x, bool train) override {
    if (static_cast<int>(x.sample_size()) != in_)
      throw std::invalid_argument("Linear: expected " + std::to_string(in_) +
                                  " features, got " + x.shape_str());
    if (train) x_ = x; else x_ = Tensor();
    in_shape_ = {x.n, x.c, x.h, x.w};
    Tensor y(x.n, out_, 1, 1);
    ConstMatMap W(weight_.value.data(), out_, in_);
    ConstMatMap X(x.data.data(), x.n, in_);
    MatMap Y(y.data.data(), x.n, out_);
    Y.noalias() = X * W.transpose();
    for (int in = 0; in < x.n; ++in)
      for (int o = 0; o < out_; ++o) y.data[in * out_ + o] += bias_.value[o];
    return y;
  }

  Tensor backward(const Tensor& dy) override {
    const auto [n, c, h, w] = in_shape_;
    Tensor dx(n, c, h, w);
    ConstMatMap W(weight_.value.data(), out_, in_);
    MatMap dW(weight_.grad.data(), out_, in_);
    ConstMatMap X(x_.data.data(), n, in_);
    ConstMatMap dY(dy.data.data(), n, out_);
    dW.noalias() += dY.transpose() * X;
    for (int in = 0; in < n; ++in)
      for (int o = 0; o < out_; ++o) bias_.grad[o] += dy.data[in * out_ + o];
    MatMap dX(dx.data.data(), n, in_);
    dX.noalias() = dY * W;
    return dx;
  }

  std::vector<Param*> params() override { return {&weight_, &bias_}; }

 private:
  int in_, out_;
  Param weight_, bias_;
  Tensor x_;
  std::array<int, 4> in_shape_{};
};

class UpsampleNearest2x : public Layer {
 public:
  Tensor forward(const Tensor& x, bool) override {
    in_shape_ = {x.n, x.c, x.h, x.w};
    Tensor y(x.n, x.c, x.h * 2, x.w * 2);
    for (int in = 0; in < x.n; ++in)
      for (int ic = 0; ic < x.c; ++ic)
        for (int iy = 0; iy < y.h; ++iy)
          for (int ix = 0; ix < y.w; ++ix)
            y.at(in, ic, iy, ix) = x.at(in, ic, iy / 2, ix / 2);
    return y;
  }
  Tensor backward(const Tensor& dy) override {
    const auto [n, c, h, w] = in_shape_;
    Tensor dx(n, c, h, w);
    for (int in = 0; in < n; ++in)
      for (int ic = 0; ic < c; ++ic)
        for (int iy = 0; iy < dy.h; ++iy)
          for (int ix = 0; ix < dy.w; ++ix)
            dx.at(in, ic, iy / 2, ix / 2) += dy.at(in, ic, iy, ix);
    return dx;
  }

 private:
  std::array<int, 4> in_shape_{};
};

// Metadata-only reshape of each sample to c x h x w.
class Reshape : public Layer {
 public:
  Reshape(int c, int h, int w) : c_(c), h_(h), w_(w) {}
  Tensor forward(const Tensor& x, bool) override {
    if (static_cast<size_t>(c_) * h_ * w_ != x.sample_size())
      throw std::invalid_argument("Reshape: size mismatch for " +
                                  x.shape_str());
    in_shape_ = {x.n, x.c, x.h, x.w};
    Tensor y = x;
    y.c = c_; y.h = h_; y.w = w_;
    return y;
  }
  Tensor backward(const Tensor& dy) override {
    Tensor dx = dy;
    dx.c = in_shape_[1]; dx.h = in_shape_[2]; dx.w = in_shape_[3];
    return dx;
  }

 private:
  int c_, h_, w_;
  std::array<int, 4> in_shape_{};
};

// Runs a straight chain of layers; the networks compose these with their
// own skip wiring where needed.
class Sequential : public Layer {
 public:
  void add(std::unique_ptr<Layer> l) { layers_.push_back(std::move(l)); }

  Tensor forward(const Tensor& x, bool train) override {
    Tensor t = x;
    for (auto& l : layers_) t = l->forward(t, train);
    return t;
  }
  Tensor backward(const Tensor& dy) override {
    Tensor t = dy;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it)
      t = (*it)->backward(t);
    return t;
  }
  std::vector<Param*> params() override {
    std::vector<Param*> out;
    for (auto& l : layers_)
      for (Param* p : l->params()) out.push_back(p);
    return out;
  }
  std::vector<std::vector<double>*> buffers() override {
    std::vector<std::vector<double>*> out;
    for (auto& l : layers_)
      for (auto* b : l->buffers()) out.push_back(b);
    return out;
  }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

// Gaussian(0, 0.02) init for conv/linear weights, zero biases, seeded.
inline void init_parameters(const std::vector<Param*>& params, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 0.02);
  for (Param* p : params) {
    if (p->name.ends_with(".weight")) {
      for (double& v : p->value) v = gauss(rng);
    } else if (p->name.ends_with(".gamma")) {
      std::fill(p->value.begin(), p->value.end(), 1.0);
    } else {
      std::fill(p->value.begin(), p->value.end(), 0.0);
    }
  }
}

inline size_t param_count(const std::vector<Param*>& params) {
  size_t n = 0;
  for (const Param* p : params) n += p->value.size();
  return n;
}

inline void zero_grads(const std::vector<Param*>& params) {
  for (Param* p : params) p->zero_grad();
}

}  // namespace rubbinggan
