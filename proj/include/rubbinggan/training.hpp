#pragma once

// Alternating optimization of G, D1, D2. Each iteration runs four
// sub-updates in order: D1 on the conditional adversarial loss, G on the
// adversarial + L1 objective, D2 on its equilibrium-weighted
// reconstruction loss, G on the reconstruction term; then the controller
// variable k is updated from the freshly computed reconstruction losses.
// Everything is single-threaded and bit-deterministic given (config, data).

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rubbinggan/adam.hpp"
#include "rubbinggan/dataset.hpp"
#include "rubbinggan/losses.hpp"
#include "rubbinggan/nets.hpp"

namespace rubbinggan {

struct TrainConfig {
  double learning_rate = 0.0002;
  double beta1 = 0.5;
  double beta2 = 0.999;
  int batch_size = 1;
  int max_iterations = 4000;
  uint64_t seed = 0;
  int image_size = 256;
  int g_base_channels = 64;
  int g_max_channels = 512;
  int d1_base_channels = 64;
  int d2_base_channels = 32;
  int d2_embedding_dim = 64;
  double gamma = 0.5;
  double lambda_k = 0.001;
  double k_init = 0.0;
  double lambda_l1 = 100.0;
  int checkpoint_interval = 1000;
  bool two_phase = false;  // train D1+G for the first half, D2+G for the rest

  nlohmann::json to_json() const {
    return {{"learning_rate", learning_rate}, {"beta1", beta1},
            {"beta2", beta2}, {"batch_size", batch_size},
            {"max_iterations", max_iterations}, {"seed", seed},
            {"image_size", image_size}, {"g_base_channels", g_base_channels},
            {"g_max_channels", g_max_channels},
            {"d1_base_channels", d1_base_channels},
            {"d2_base_channels", d2_base_channels},
            {"d2_embedding_dim", d2_embedding_dim}, {"gamma", gamma},
            {"lambda_k", lambda_k}, {"k_init", k_init},
            {"lambda_l1", lambda_l1},
            {"checkpoint_interval", checkpoint_interval},
            {"two_phase", two_phase}};
  }
  static TrainConfig from_json(const nlohmann::json& j) {
    TrainConfig c;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_iterations = j.value("max_iterations", c.max_iterations);
    c.seed = j.value("seed", c.seed);
    c.image_size = j.value("image_size", c.image_size);
    c.g_base_channels = j.value("g_base_channels", c.g_base_channels);
    c.g_max_channels = j.value("g_max_channels", c.g_max_channels);
    c.d1_base_channels = j.value("d1_base_channels", c.d1_base_channels);
    c.d2_base_channels = j.value("d2_base_channels", c.d2_base_channels);
    c.d2_embedding_dim = j.value("d2_embedding_dim", c.d2_embedding_dim);
    c.gamma = j.value("gamma", c.gamma);
    c.lambda_k = j.value("lambda_k", c.lambda_k);
    c.k_init = j.value("k_init", c.k_init);
    c.lambda_l1 = j.value("lambda_l1", c.lambda_l1);
    c.checkpoint_interval = j.value("checkpoint_interval", c.checkpoint_interval);
    c.two_phase = j.value("two_phase", c.two_phase);
    return c;
  }
};

struct TrainLogRecord {
  uint64_t iteration = 0;
  double d1_loss = 0.0;
  double g_adv = 0.0;
  double l1 = 0.0;
  double d2_loss = 0.0;
  double g_recon = 0.0;
  double g_objective = 0.0;
  double k = 0.0;
  double convergence_measure = 0.0;

  static const char* csv_header() {
    return "iteration,d1_loss,g_adv,l1,d2_loss,g_recon,g_objective,k,"
           "convergence_measure";
  }
  void write_csv(std::ostream& os) const {
    os.precision(17);
    os << iteration << ',' << d1_loss << ',' << g_adv << ',' << l1 << ','
       << d2_loss << ',' << g_recon << ',' << g_objective << ',' << k << ','
       << convergence_measure << '\n';
  }
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {
inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  uint64_t z = seed + salt * 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
inline void check_finite(double v, const char* term) {
  if (!std::isfinite(v))
    throw TrainingError(std::string("non-finite loss term: ") + term);
}
}  // namespace detail

class Trainer {
 public:
  explicit Trainer(const TrainConfig& cfg) : cfg_(cfg) {
    gspec_.image_size = cfg.image_size;
    gspec_.base_channels = cfg.g_base_channels;
    gspec_.max_channels = cfg.g_max_channels;
    d1spec_.base_channels = cfg.d1_base_channels;
    d1spec_.num_strided = PatchDiscriminatorSpec::auto_strided(cfg.image_size);
    d2spec_.image_size = cfg.image_size;
    d2spec_.base_channels = cfg.d2_base_channels;
    d2spec_.embedding_dim = cfg.d2_embedding_dim;
    build();
    g_->init(detail::mix_seed(cfg.seed, 1));
    d1_->init(detail::mix_seed(cfg.seed, 2));
    d2_->init(detail::mix_seed(cfg.seed, 3));
    eq_.gamma = cfg.gamma;
    eq_.lambda_k = cfg.lambda_k;
    eq_.k = cfg.k_init;
  }

  // One full iteration on a prepared batch (x, y in symmetric range).
  TrainLogRecord train_step(const Tensor& x, const Tensor& y) {
    TrainLogRecord rec;
    rec.iteration = iteration_ + 1;
    const bool phase1 = !cfg_.two_phase ||
                        iteration_ < static_cast<uint64_t>(
                                         cfg_.max_iterations) / 2;
    const bool phase2 = !cfg_.two_phase || !phase1;

    double l_real = 0.0, l_fake = 0.0;

    if (phase1) {
      // (1) D1 step on -[log D1(x,y) + log(1 - D1(x, G(x)))]
      Tensor fake = g_->forward(x, true);
      d1_->zero_grad();
      // the two loss terms are independent, so each pass is backpropped
      // while its caches are still live
      Tensor fake_scores = d1_->forward(concat_channels(x, fake), true);
      Tensor real_scores, d_real, d_fake_scores;
      cgan_d1_loss_grad(fake_scores, fake_scores, d_real, d_fake_scores);
      d1_->backward(d_fake_scores);
      real_scores = d1_->forward(concat_channels(x, y), true);
      cgan_d1_loss_grad(real_scores, fake_scores, d_real, d_fake_scores);
      d1_->backward(d_real);
      rec.d1_loss = cgan_d1_loss(real_scores, fake_scores);
      detail::check_finite(rec.d1_loss, "d1_loss");
      opt_d1_.step(d1_->params());

      // (2) G step on -log D1(x, G(x)) + lambda * L1(y, G(x))
      g_->zero_grad();
      Tensor fake2 = g_->forward(x, true);
      Tensor fake_scores2 = d1_->forward(concat_channels(x, fake2), true);
      rec.g_adv = cgan_g_loss(fake_scores2);
      rec.l1 = l1_loss(y, fake2);
      detail::check_finite(rec.g_adv, "g_adv");
      detail::check_finite(rec.l1, "l1");
      Tensor d_concat = d1_->backward(cgan_g_loss_grad(fake_scores2));
      Tensor d_fake2 = second_half_channels(d_concat, x.c);
      Tensor d_l1 = l1_loss_grad(y, fake2);
      for (size_t i = 0; i < d_fake2.size(); ++i)
        d_fake2.data[i] += cfg_.lambda_l1 * d_l1.data[i];
      g_->backward(d_fake2);
      opt_g_.step(g_->params());
    } else {
      // still log the monitored values for the inactive phase
      Tensor fake = g_->forward(x, false);
      Tensor real_scores = d1_->forward(concat_channels(x, y), false);
      Tensor fake_scores = d1_->forward(concat_channels(x, fake), false);
      rec.d1_loss = cgan_d1_loss(real_scores, fake_scores);
      rec.g_adv = cgan_g_loss(fake_scores);
      rec.l1 = l1_loss(y, fake);
    }

    if (phase2) {
      // (3) D2 step on L(y) - k * L(G(x))
      Tensor fake3 = g_->forward(x, true);
      d2_->zero_grad();
      {
        Tensor rec_fake = d2_->forward(fake3, true);
        l_fake = recon_loss(fake3, rec_fake);
        Tensor d_rec = l1_loss_grad(fake3, rec_fake);
        for (double& v : d_rec.data) v *= -eq_.k;
        d2_->backward(d_rec);
      }
      {
        Tensor rec_real = d2_->forward(y, true);
        l_real = recon_loss(y, rec_real);
        d2_->backward(l1_loss_grad(y, rec_real));
      }
      rec.d2_loss = l_real - eq_.k * l_fake;
      detail::check_finite(rec.d2_loss, "d2_loss");
      opt_d2_.step(d2_->params());

      // (4) G step on L(G(x)) through the updated D2
      g_->zero_grad();
      Tensor fake4 = g_->forward(x, true);
      Tensor rec_fake = d2_->forward(fake4, true);
      rec.g_recon = recon_loss(fake4, rec_fake);
      detail::check_finite(rec.g_recon, "g_recon");
      l_fake = rec.g_recon;
      // d/d(fake) has two paths: directly in the L1 and through D2
      Tensor d_rec = l1_loss_grad(fake4, rec_fake);
      Tensor d_fake = d2_->backward(d_rec);
      for (size_t i = 0; i < d_fake.size(); ++i)
        d_fake.data[i] -= d_rec.data[i];
      g_->backward(d_fake);
      opt_g_.step(g_->params());

      eq_ = update_k(eq_, l_real, l_fake);
      rec.convergence_measure = convergence_measure(l_real, l_fake, eq_.gamma);
      detail::check_finite(rec.convergence_measure, "convergence_measure");
    }

    rec.k = eq_.k;
    rec.g_objective =
        generator_objective(rec.g_adv, rec.l1, rec.g_recon, {cfg_.lambda_l1});
    ++iteration_;
    return rec;
  }

  const TrainConfig& config() const { return cfg_; }
  uint64_t iteration() const { return iteration_; }
  const EquilibriumState& equilibrium() const { return eq_; }
  UNetGenerator& generator() { return *g_; }
  PatchDiscriminator& d1() { return *d1_; }
  AutoEncoderDiscriminator& d2() { return *d2_; }

  // ---- checkpointing ----

  static constexpr uint32_t kCheckpointVersion = 1;
  static constexpr char kMagic[8] = {'R', 'G', 'C', 'K', 'P', 'T', '0', '0'};

  void save_checkpoint(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out)
      throw std::runtime_error("save_checkpoint: cannot write " +
                               path.string());
    nlohmann::json header = {
        {"version", kCheckpointVersion},
        {"config", cfg_.to_json()},
        {"generator_spec", gspec_.to_json()},
        {"d1_spec", d1spec_.to_json()},
        {"d2_spec", d2spec_.to_json()},
        {"iteration", iteration_},
        {"k", eq_.k},
        {"adam_steps",
         {opt_g_.steps(), opt_d1_.steps(), opt_d2_.steps()}}};
    const std::string hs = header.dump();
    out.write(kMagic, 8);
    write_u64(out, hs.size());
    out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
    auto dump_net = [&out](Network& net, AdamOptimizer& opt) {
      for (const Param* p : net.params()) write_vec(out, p->value);
      for (const auto* b : net.buffers()) write_vec(out, *b);
      for (const auto& m : opt.first_moments()) write_vec(out, m);
      for (const auto& v : opt.second_moments()) write_vec(out, v);
    };
    auto* self = const_cast<Trainer*>(this);
    dump_net(*self->g_, self->opt_g_);
    dump_net(*self->d1_, self->opt_d1_);
    dump_net(*self->d2_, self->opt_d2_);
    if (!out) throw std::runtime_error("save_checkpoint: write failed");
  }

  static Trainer load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw std::runtime_error("load_checkpoint: cannot read " +
                               path.string());
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0)
      throw std::runtime_error("load_checkpoint: not a checkpoint file: " +
                               path.string());
    const uint64_t hlen = read_u64(in);
    std::string hs(hlen, '\0');
    in.read(hs.data(), static_cast<std::streamsize>(hlen));
    nlohmann::json header = nlohmann::json::parse(hs);
    if (header.at("version").get<uint32_t>() != kCheckpointVersion)
      throw std::runtime_error(
          "load_checkpoint: unsupported checkpoint version " +
          std::to_string(header.at("version").get<uint32_t>()));
    Trainer t(TrainConfig::from_json(header.at("config")));
    t.gspec_ = GeneratorSpec::from_json(header.at("generator_spec"));
    t.d1spec_ = PatchDiscriminatorSpec::from_json(header.at("d1_spec"));
    t.d2spec_ =
        AutoEncoderDiscriminatorSpec::from_json(header.at("d2_spec"));
    t.build();
    t.iteration_ = header.at("iteration");
    t.eq_.k = header.at("k");
    const auto steps = header.at("adam_steps");
    t.opt_g_.step_counter() = steps.at(0);
    t.opt_d1_.step_counter() = steps.at(1);
    t.opt_d2_.step_counter() = steps.at(2);
    auto load_net = [&in, &path](Network& net, AdamOptimizer& opt) {
      for (Param* p : net.params()) read_vec(in, p->value, path);
      for (auto* b : net.buffers()) read_vec(in, *b, path);
      for (auto& m : opt.first_moments()) read_vec(in, m, path);
      for (auto& v : opt.second_moments()) read_vec(in, v, path);
    };
    load_net(*t.g_, t.opt_g_);
    load_net(*t.d1_, t.opt_d1_);
    load_net(*t.d2_, t.opt_d2_);
    if (!in)
      throw std::runtime_error("load_checkpoint: truncated file " +
                               path.string());
    return t;
  }

 private:
  void build() {
    g_ = std::make_unique<UNetGenerator>(gspec_);
    d1_ = std::make_unique<PatchDiscriminator>(d1spec_);
    d2_ = std::make_unique<AutoEncoderDiscriminator>(d2spec_);
    opt_g_ = AdamOptimizer(cfg_.learning_rate, cfg_.beta1, cfg_.beta2);
    opt_d1_ = AdamOptimizer(cfg_.learning_rate, cfg_.beta1, cfg_.beta2);
    opt_d2_ = AdamOptimizer(cfg_.learning_rate, cfg_.beta1, cfg_.beta2);
    opt_g_.attach(g_->params());
    opt_d1_.attach(d1_->params());
    opt_d2_.attach(d2_->params());
  }

  static Tensor second_half_channels(const Tensor& t, int skip_c) {
    Tensor out(t.n, t.c - skip_c, t.h, t.w);
    for (int in = 0; in < t.n; ++in) {
      const double* src =
          t.data.data() + in * t.sample_size() + skip_c * t.plane();
      std::copy(src, src + out.sample_size(),
                out.data.begin() + in * out.sample_size());
    }
    return out;
  }

  static void write_u64(std::ostream& os, uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
  }
  static uint64_t read_u64(std::istream& is) {
    uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof v);
    return v;
  }
  static void write_vec(std::ostream& os, const std::vector<double>& v) {
    write_u64(os, v.size());
    os.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
  }
  static void read_vec(std::istream& is, std::vector<double>& v,
                       const std::filesystem::path& path) {
    const uint64_t n = read_u64(is);
    if (n != v.size())
      throw std::runtime_error(
          "load_checkpoint: layout mismatch in " + path.string());
    is.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
  }

  TrainConfig cfg_;
  GeneratorSpec gspec_;
  PatchDiscriminatorSpec d1spec_;
  AutoEncoderDiscriminatorSpec d2spec_;
  std::unique_ptr<UNetGenerator> g_;
  std::unique_ptr<PatchDiscriminator> d1_;
  std::unique_ptr<AutoEncoderDiscriminator> d2_;
  AdamOptimizer opt_g_, opt_d1_, opt_d2_;
  EquilibriumState eq_;
  uint64_t iteration_ = 0;
};

// Runs the training loop over prepared samples. Samples are cached in
// memory when the dataset is small enough, otherwise reloaded per batch.
class TrainLoop {
 public:
  TrainLoop(Trainer& trainer, const std::filesystem::path& dataset_root,
            const DatasetManifest& manifest)
      : trainer_(trainer), root_(dataset_root), manifest_(manifest) {
    if (manifest.entries.empty())
      throw std::runtime_error("train_loop: empty training manifest");
    const size_t bytes_per_sample = 2ull * 3 *
                                    trainer.config().image_size *
                                    trainer.config().image_size * 8;
    cache_all_ = manifest.entries.size() * bytes_per_sample < (1ull << 28);
    if (cache_all_) {
      cache_.resize(manifest.entries.size());
      cached_.assign(manifest.entries.size(), false);
    }
  }

  // Runs until trainer.iteration() == target_iterations, writing one CSV
  // row per step and a checkpoint every `checkpoint_interval` steps (and
  // at the end).
  void run(uint64_t target_iterations, std::ostream* log,
           const std::optional<std::filesystem::path>& checkpoint_path,
           std::ostream* progress = nullptr) {
    BatchIterator it(manifest_, trainer_.config().batch_size,
                     trainer_.config().seed, true);
    // replay already-consumed batches so a resumed run sees the same stream
    for (uint64_t i = 0; i < trainer_.iteration(); ++i) it.next_batch();
    if (log && trainer_.iteration() == 0)
      *log << TrainLogRecord::csv_header() << '\n';
    while (trainer_.iteration() < target_iterations) {
      const auto idx = it.next_batch();
      auto [x, y] = load_batch(idx);
      TrainLogRecord rec = trainer_.train_step(x, y);
      if (log) rec.write_csv(*log);
      if (progress && rec.iteration % 100 == 0)
        *progress << "iter " << rec.iteration << " l1=" << rec.l1
                  << " M=" << rec.convergence_measure << "\n";
      if (checkpoint_path &&
          (trainer_.iteration() % trainer_.config().checkpoint_interval == 0 ||
           trainer_.iteration() == target_iterations))
        trainer_.save_checkpoint(*checkpoint_path);
    }
  }

 private:
  std::pair<Tensor, Tensor> load_batch(const std::vector<size_t>& idx) {
    std::vector<Tensor> xs, ys;
    for (size_t i : idx) {
      const PairedSample& s = sample(i);
      xs.push_back(to_tensor(s.source));
      ys.push_back(to_tensor(s.target));
    }
    return {stack(xs), stack(ys)};
  }

  const PairedSample& sample(size_t i) {
    if (cache_all_) {
      if (!cached_[i]) {
        cache_[i] = prepare_sample(
            load_pair(root_, manifest_.entries[i], manifest_.pair_layout),
            trainer_.config().image_size);
        cached_[i] = true;
      }
      return cache_[i];
    }
    scratch_ = prepare_sample(
        load_pair(root_, manifest_.entries[i], manifest_.pair_layout),
        trainer_.config().image_size);
    return scratch_;
  }

  Trainer& trainer_;
  std::filesystem::path root_;
  DatasetManifest manifest_;
  bool cache_all_ = false;
  std::vector<PairedSample> cache_;
  std::vector<bool> cached_;
  PairedSample scratch_;
};

}  // namespace rubbinggan
