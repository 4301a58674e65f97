#pragma once

// The three networks: U-Net generator, patch-based conditional
// discriminator, auto-encoder discriminator. Specs are declarative and
// serialize to JSON so a checkpoint can rebuild the exact topology.

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rubbinggan/layers.hpp"

namespace rubbinggan {

inline int int_log2(int v) {
  int l = 0;
  while ((1 << (l + 1)) <= v) ++l;
  return l;
}

struct GeneratorSpec {
  int image_size = 256;
  int in_channels = 3;
  int out_channels = 3;
  int base_channels = 64;
  int max_channels = 512;
  int depth = 0;  // 0 = auto: halve down to a 1x1 bottleneck

  int effective_depth() const {
    return depth > 0 ? depth : int_log2(image_size);
  }
  nlohmann::json to_json() const {
    return {{"image_size", image_size}, {"in_channels", in_channels},
            {"out_channels", out_channels}, {"base_channels", base_channels},
            {"max_channels", max_channels}, {"depth", depth}};
  }
  static GeneratorSpec from_json(const nlohmann::json& j) {
    GeneratorSpec s;
    s.image_size = j.at("image_size");
    s.in_channels = j.at("in_channels");
    s.out_channels = j.at("out_channels");
    s.base_channels = j.at("base_channels");
    s.max_channels = j.at("max_channels");
    s.depth = j.at("depth");
    return s;
  }
};

struct PatchDiscriminatorSpec {
  int in_channels = 6;  // channel-concatenation of condition and candidate
  int base_channels = 64;
  // stride-2 conv blocks before the two stride-1 layers; 3 gives the
  // canonical 70x70 receptive field, smaller values keep the score map
  // non-empty on reduced test resolutions
  int num_strided = 3;

  // largest stack that still emits a non-empty score map
  static int auto_strided(int image_size) {
    return std::max(1, std::min(3, int_log2(image_size) - 2));
  }

  nlohmann::json to_json() const {
    return {{"in_channels", in_channels}, {"base_channels", base_channels},
            {"num_strided", num_strided}};
  }
  static PatchDiscriminatorSpec from_json(const nlohmann::json& j) {
    PatchDiscriminatorSpec s;
    s.in_channels = j.at("in_channels");
    s.base_channels = j.at("base_channels");
    s.num_strided = j.value("num_strided", 3);
    return s;
  }
};

struct AutoEncoderDiscriminatorSpec {
  int image_size = 256;
  int channels = 3;
  int base_channels = 32;
  int max_channels = 128;
  int embedding_dim = 64;

  // encoder downsamples to an 8x8 (or smaller) grid before the embedding
  int num_down() const { return std::max(0, int_log2(image_size) - 3); }
  int grid() const { return image_size >> num_down(); }

  nlohmann::json to_json() const {
    return {{"image_size", image_size}, {"channels", channels},
            {"base_channels", base_channels}, {"max_channels", max_channels},
            {"embedding_dim", embedding_dim}};
  }
  static AutoEncoderDiscriminatorSpec from_json(const nlohmann::json& j) {
    AutoEncoderDiscriminatorSpec s;
    s.image_size = j.at("image_size");
    s.channels = j.at("channels");
    s.base_channels = j.at("base_channels");
    s.max_channels = j.at("max_channels");
    s.embedding_dim = j.at("embedding_dim");
    return s;
  }
};

class Network {
 public:
  virtual ~Network() = default;
  virtual Tensor forward(const Tensor& x, bool train) = 0;
  virtual Tensor backward(const Tensor& dy) = 0;
  virtual std::vector<Param*> params() = 0;
  virtual std::vector<std::vector<double>*> buffers() = 0;
  void init(uint64_t seed) { init_parameters(params(), seed); }
  void zero_grad() { zero_grads(params()); }
};

// Mirror-skip encoder/decoder. Encoder blocks are conv k4 s2 p1 with
// leaky-ReLU pre-activation and batch norm (no norm on the first conv and
// on the bottleneck); decoder blocks are transposed conv k4 s2 p1 with
// ReLU pre-activation, batch norm, and the mirrored encoder activation
// concatenated on the way up. Output head is tanh, so the generator maps
// [-1,1] images to [-1,1] images. No dropout: inference is deterministic.
class UNetGenerator : public Network {
 public:
  explicit UNetGenerator(const GeneratorSpec& spec) : spec_(spec) {
    const int d = spec.effective_depth();
    if (d < 2)
      throw std::invalid_argument("UNetGenerator: depth must be >= 2");
    if ((spec.image_size >> d) < 1 || (1 << int_log2(spec.image_size)) !=
                                          spec.image_size)
      throw std::invalid_argument(
          "UNetGenerator: image_size must be a power of two >= 2^depth");
    ch_.resize(d);
    for (int i = 0; i < d; ++i)
      ch_[i] = std::min(spec.base_channels << i, spec.max_channels);

    enc_convs_.push_back(std::make_unique<Conv2d>("g.enc0", spec.in_channels,
                                                  ch_[0], 4, 2, 1));
    enc_bns_.push_back(nullptr);
    for (int i = 1; i < d; ++i) {
      enc_convs_.push_back(std::make_unique<Conv2d>(
          "g.enc" + std::to_string(i), ch_[i - 1], ch_[i], 4, 2, 1));
      enc_bns_.push_back(i == d - 1 ? nullptr
                                    : std::make_unique<BatchNorm2d>(
                                          "g.enc" + std::to_string(i) + ".bn",
                                          ch_[i]));
      enc_acts_.push_back(std::make_unique<LeakyReLU>(0.2));
    }
    // decoder blocks, innermost first
    for (int i = d - 1; i >= 1; --i) {
      const int in_c = (i == d - 1) ? ch_[i] : 2 * ch_[i];
      dec_convs_.push_back(std::make_unique<ConvTranspose2d>(
          "g.dec" + std::to_string(i), in_c, ch_[i - 1], 4, 2, 1));
      dec_bns_.push_back(std::make_unique<BatchNorm2d>(
          "g.dec" + std::to_string(i) + ".bn", ch_[i - 1]));
      dec_acts_.push_back(std::make_unique<ReLU>());
    }
    out_act_ = std::make_unique<ReLU>();
    out_conv_ = std::make_unique<ConvTranspose2d>("g.out", 2 * ch_[0],
                                                  spec.out_channels, 4, 2, 1);
  }

  Tensor forward(const Tensor& x, bool train) override {
    if (x.c != spec_.in_channels || x.h != spec_.image_size ||
        x.w != spec_.image_size)
      throw std::invalid_argument("UNetGenerator: bad input shape " +
                                  x.shape_str());
    const int d = static_cast<int>(ch_.size());
    std::vector<Tensor> enc(d);
    enc[0] = enc_convs_[0]->forward(x, train);
    for (int i = 1; i < d; ++i) {
      Tensor t = enc_acts_[i - 1]->forward(enc[i - 1], train);
      t = enc_convs_[i]->forward(t, train);
      enc[i] = enc_bns_[i] ? enc_bns_[i]->forward(t, train) : std::move(t);
    }
    Tensor up;
    for (int b = 0; b < d - 1; ++b) {
      const int level = d - 1 - b;  // encoder level being upsampled from
      Tensor in = (b == 0) ? enc[d - 1] : concat_channels(up, enc[level]);
      Tensor t = dec_acts_[b]->forward(in, train);
      t = dec_convs_[b]->forward(t, train);
      up = dec_bns_[b]->forward(t, train);
    }
    Tensor skip0 = enc[0];
    if (ablate_outer_skip) skip0.zero();
    Tensor in = concat_channels(up, skip0);
    Tensor t = out_act_->forward(in, train);
    t = out_conv_->forward(t, train);
    return tanh_.forward(t, train);
  }

  Tensor backward(const Tensor& dy) override {
    const int d = static_cast<int>(ch_.size());
    std::vector<Tensor> denc(d);
    Tensor t = tanh_.backward(dy);
    t = out_conv_->backward(t);
    t = out_act_->backward(t);
    Tensor dup = split_first(t, ch_[0], denc[0]);
    for (int b = d - 2; b >= 0; --b) {
      const int level = d - 1 - b;
      Tensor g = dec_bns_[b]->backward(dup);
      g = dec_convs_[b]->backward(g);
      g = dec_acts_[b]->backward(g);
      if (b == 0) {
        denc[d - 1] = std::move(g);
      } else {
        // each encoder level feeds exactly one concat, so this is the
        // first (and only) skip gradient for `level`
        dup = split_first(g, ch_[level], denc[level]);
      }
    }
    Tensor dx;
    for (int i = d - 1; i >= 1; --i) {
      Tensor g = denc[i];
      if (enc_bns_[i]) g = enc_bns_[i]->backward(g);
      g = enc_convs_[i]->backward(g);
      g = enc_acts_[i - 1]->backward(g);
      denc[i - 1] += g;
    }
    dx = enc_convs_[0]->backward(denc[0]);
    return dx;
  }

  std::vector<Param*> params() override {
    std::vector<Param*> out;
    auto add = [&out](Layer* l) {
      if (!l) return;
      for (Param* p : l->params()) out.push_back(p);
    };
    for (auto& l : enc_convs_) add(l.get());
    for (auto& l : enc_bns_) add(l.get());
    for (auto& l : dec_convs_) add(l.get());
    for (auto& l : dec_bns_) add(l.get());
    add(out_conv_.get());
    return out;
  }
  std::vector<std::vector<double>*> buffers() override {
    std::vector<std::vector<double>*> out;
    for (auto& l : enc_bns_)
      if (l)
        for (auto* b : l->buffers()) out.push_back(b);
    for (auto& l : dec_bns_)
      for (auto* b : l->buffers()) out.push_back(b);
    return out;
  }

  const GeneratorSpec& spec() const { return spec_; }

  // Test hook: zero the outermost skip contribution to verify the skips
  // are actually wired into the output.
  bool ablate_outer_skip = false;

 private:
  // splits dy into (first `c_first` channels -> returned, rest -> rest_out)
  static Tensor split_first(const Tensor& t, int c_keep, Tensor& rest_out) {
    Tensor first(t.n, c_keep, t.h, t.w);
    rest_out = Tensor(t.n, t.c - c_keep, t.h, t.w);
    for (int in = 0; in < t.n; ++in) {
      const double* src = t.data.data() + in * t.sample_size();
      std::copy(src, src + first.sample_size(),
                first.data.begin() + in * first.sample_size());
      std::copy(src + first.sample_size(), src + t.sample_size(),
                rest_out.data.begin() + in * rest_out.sample_size());
    }
    return first;
  }

  GeneratorSpec spec_;
  std::vector<int> ch_;
  std::vector<std::unique_ptr<Conv2d>> enc_convs_;
  std::vector<std::unique_ptr<BatchNorm2d>> enc_bns_;  // index-aligned, may be null
  std::vector<std::unique_ptr<LeakyReLU>> enc_acts_;
  std::vector<std::unique_ptr<ConvTranspose2d>> dec_convs_;
  std::vector<std::unique_ptr<BatchNorm2d>> dec_bns_;
  std::vector<std::unique_ptr<ReLU>> dec_acts_;
  std::unique_ptr<ReLU> out_act_;
  std::unique_ptr<ConvTranspose2d> out_conv_;
  Tanh tanh_;
};

// 70x70-receptive-field patch discriminator: four conv blocks (stride
// 2,2,2,1) and a final stride-1 conv to a 1-channel map, sigmoid head.
// On 256x256 input the score map is 30x30.
class PatchDiscriminator : public Network {
 public:
  explicit PatchDiscriminator(const PatchDiscriminatorSpec& spec)
      : spec_(spec) {
    const int b = spec.base_channels;
    int c = spec.in_channels;
    for (int i = 0; i < spec.num_strided; ++i) {
      const int oc = b << i;
      net_.add(std::make_unique<Conv2d>("d1.c" + std::to_string(i), c, oc, 4,
                                        2, 1));
      if (i > 0) net_.add(std::make_unique<BatchNorm2d>(
          "d1.c" + std::to_string(i) + ".bn", oc));
      net_.add(std::make_unique<LeakyReLU>(0.2));
      c = oc;
    }
    const int penult = 2 * c;
    net_.add(std::make_unique<Conv2d>("d1.c" +
                                          std::to_string(spec.num_strided),
                                      c, penult, 4, 1, 1));
    net_.add(std::make_unique<BatchNorm2d>(
        "d1.c" + std::to_string(spec.num_strided) + ".bn", penult));
    net_.add(std::make_unique<LeakyReLU>(0.2));
    net_.add(std::make_unique<Conv2d>("d1.out", penult, 1, 4, 1, 1));
    net_.add(std::make_unique<Sigmoid>());
  }

  Tensor forward(const Tensor& x, bool train) override {
    if (x.c != spec_.in_channels)
      throw std::invalid_argument("PatchDiscriminator: expected " +
                                  std::to_string(spec_.in_channels) +
                                  " channels, got " + x.shape_str());
    if (score_map_size(x.h, spec_.num_strided) < 1 ||
        score_map_size(x.w, spec_.num_strided) < 1)
      throw std::invalid_argument(
          "PatchDiscriminator: input " + x.shape_str() +
          " too small for a " + std::to_string(spec_.num_strided) +
          "-strided patch stack");
    return net_.forward(x, train);
  }
  Tensor backward(const Tensor& dy) override { return net_.backward(dy); }
  std::vector<Param*> params() override { return net_.params(); }
  std::vector<std::vector<double>*> buffers() override {
    return net_.buffers();
  }
  const PatchDiscriminatorSpec& spec() const { return spec_; }

  static int score_map_size(int image_size, int num_strided = 3) {
    int s = image_size;
    for (int i = 0; i < num_strided; ++i) s = conv_out_size(s, 4, 2, 1);
    s = conv_out_size(s, 4, 1, 1);
    s = conv_out_size(s, 4, 1, 1);
    return s;
  }

 private:
  PatchDiscriminatorSpec spec_;
  Sequential net_;
};

// Auto-encoder discriminator: strided conv encoder down to an 8x8 grid,
// linear bottleneck of embedding_dim units, then nearest-neighbor
// upsampling + conv back to the input shape. No normalization layers.
class AutoEncoderDiscriminator : public Network {
 public:
  explicit AutoEncoderDiscriminator(const AutoEncoderDiscriminatorSpec& spec)
      : spec_(spec) {
    const int nd = spec.num_down();
    int c = spec.channels;
    for (int i = 0; i < nd; ++i) {
      const int oc = std::min(spec.base_channels << i, spec.max_channels);
      encoder_.add(std::make_unique<Conv2d>("d2.enc" + std::to_string(i), c,
                                            oc, 4, 2, 1));
      encoder_.add(std::make_unique<LeakyReLU>(0.2));
      c = oc;
    }
    const int g = spec.grid();
    encoder_.add(std::make_unique<Linear>("d2.embed", c * g * g,
                                          spec.embedding_dim));
    decoder_.add(std::make_unique<Linear>(
        "d2.expand", spec.embedding_dim, spec.base_channels * g * g));
    decoder_.add(std::make_unique<Reshape>(spec.base_channels, g, g));
    for (int i = 0; i < nd; ++i) {
      decoder_.add(std::make_unique<UpsampleNearest2x>());
      decoder_.add(std::make_unique<Conv2d>("d2.dec" + std::to_string(i),
                                            spec.base_channels,
                                            spec.base_channels, 3, 1, 1));
      decoder_.add(std::make_unique<LeakyReLU>(0.2));
    }
    decoder_.add(std::make_unique<Conv2d>("d2.out", spec.base_channels,
                                          spec.channels, 3, 1, 1));
    decoder_.add(std::make_unique<Tanh>());
  }

  Tensor encode(const Tensor& v, bool train) {
    if (v.c != spec_.channels || v.h != spec_.image_size ||
        v.w != spec_.image_size)
      throw std::invalid_argument("AutoEncoderDiscriminator: bad input " +
                                  v.shape_str());
    return encoder_.forward(v, train);
  }

  Tensor decode(const Tensor& z, bool train) {
    return decoder_.forward(z, train);
  }

  Tensor forward(const Tensor& v, bool train) override {
    return decode(encode(v, train), train);
  }

  Tensor backward(const Tensor& dy) override {
    return encoder_.backward(decoder_.backward(dy));
  }

  std::vector<Param*> params() override {
    auto out = encoder_.params();
    for (Param* p : decoder_.params()) out.push_back(p);
    return out;
  }
  std::vector<std::vector<double>*> buffers() override { return {}; }
  const AutoEncoderDiscriminatorSpec& spec() const { return spec_; }

 private:
  AutoEncoderDiscriminatorSpec spec_;
  Sequential encoder_;
  Sequential decoder_;
};

}  // namespace rubbinggan
