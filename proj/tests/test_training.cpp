#include <catch2/catch_amalgamated.hpp>

#include "rubbinggan/training.hpp"

#include <random>

#include "helpers.hpp"

using namespace rubbinggan;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.image_size = 16;
  cfg.g_base_channels = 4;
  cfg.g_max_channels = 8;
  cfg.d1_base_channels = 4;
  cfg.d2_base_channels = 4;
  cfg.d2_embedding_dim = 8;
  cfg.seed = 42;
  return cfg;
}

std::pair<Tensor, Tensor> tiny_batch(uint64_t seed) {
  Tensor x(1, 3, 16, 16), y(1, 3, 16, 16);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  for (double& v : x.data) v = u(rng);
  for (double& v : y.data) v = u(rng);
  return {x, y};
}

std::vector<double> snapshot(Network& net) {
  std::vector<double> out;
  for (const Param* p : net.params())
    out.insert(out.end(), p->value.begin(), p->value.end());
  return out;
}

bool records_equal(const TrainLogRecord& a, const TrainLogRecord& b) {
  return a.iteration == b.iteration && a.d1_loss == b.d1_loss &&
         a.g_adv == b.g_adv && a.l1 == b.l1 && a.d2_loss == b.d2_loss &&
         a.g_recon == b.g_recon && a.k == b.k &&
         a.convergence_measure == b.convergence_measure;
}

}  // namespace

TEST_CASE("zero learning rate leaves parameters unchanged but updates k") {
  TrainConfig cfg = tiny_config();
  cfg.learning_rate = 0.0;
  Trainer t(cfg);
  auto before = snapshot(t.generator());
  auto [x, y] = tiny_batch(1);
  TrainLogRecord rec = t.train_step(x, y);
  REQUIRE(snapshot(t.generator()) == before);
  REQUIRE(rec.k != cfg.k_init);  // controller still moved
}

TEST_CASE("train_step is bit-deterministic given config and batch") {
  auto [x, y] = tiny_batch(2);
  Trainer a(tiny_config()), b(tiny_config());
  for (int i = 0; i < 3; ++i) {
    TrainLogRecord ra = a.train_step(x, y);
    TrainLogRecord rb = b.train_step(x, y);
    REQUIRE(records_equal(ra, rb));
  }
  REQUIRE(snapshot(a.generator()) == snapshot(b.generator()));
}

TEST_CASE("k trace stays in [0,1] and losses stay finite") {
  Trainer t(tiny_config());
  std::mt19937_64 rng(3);
  for (int i = 0; i < 5; ++i) {
    auto [x, y] = tiny_batch(rng());
    TrainLogRecord rec = t.train_step(x, y);
    REQUIRE(rec.k >= 0.0);
    REQUIRE(rec.k <= 1.0);
    REQUIRE(std::isfinite(rec.d1_loss));
    REQUIRE(std::isfinite(rec.g_objective));
    REQUIRE(std::isfinite(rec.convergence_measure));
    REQUIRE(rec.iteration == static_cast<uint64_t>(i + 1));
  }
}

TEST_CASE("checkpoint save/load round-trips bit-exactly") {
  testutil::TempDir tmp("ckpt");
  Trainer t(tiny_config());
  auto [x, y] = tiny_batch(4);
  t.train_step(x, y);
  const auto path = tmp.path / "c.rgc";
  t.save_checkpoint(path);
  Trainer back = Trainer::load_checkpoint(path);
  REQUIRE(snapshot(back.generator()) == snapshot(t.generator()));
  REQUIRE(snapshot(back.d1()) == snapshot(t.d1()));
  REQUIRE(snapshot(back.d2()) == snapshot(t.d2()));
  REQUIRE(back.iteration() == t.iteration());
  REQUIRE(back.equilibrium().k == t.equilibrium().k);
  // config snapshot is embedded: no external config needed
  REQUIRE(back.config().image_size == 16);
  REQUIRE(back.config().seed == 42);
}

TEST_CASE("resume after checkpoint equals an uninterrupted run") {
  testutil::TempDir tmp("resume");
  auto [x, y] = tiny_batch(5);

  Trainer full(tiny_config());
  std::vector<TrainLogRecord> full_recs;
  for (int i = 0; i < 10; ++i) full_recs.push_back(full.train_step(x, y));

  Trainer half(tiny_config());
  for (int i = 0; i < 5; ++i) half.train_step(x, y);
  half.save_checkpoint(tmp.path / "half.rgc");
  Trainer resumed = Trainer::load_checkpoint(tmp.path / "half.rgc");
  for (int i = 5; i < 10; ++i) {
    TrainLogRecord rec = resumed.train_step(x, y);
    REQUIRE(records_equal(rec, full_recs[i]));
  }
  REQUIRE(snapshot(resumed.generator()) == snapshot(full.generator()));
}

TEST_CASE("corrupt or version-mismatched checkpoints are rejected") {
  testutil::TempDir tmp("badckpt");
  const auto good = tmp.path / "good.rgc";
  Trainer t(tiny_config());
  t.save_checkpoint(good);

  const auto garbage = tmp.path / "garbage.rgc";
  std::ofstream(garbage) << "not a checkpoint";
  REQUIRE_THROWS_WITH(Trainer::load_checkpoint(garbage),
                      Catch::Matchers::ContainsSubstring("not a checkpoint"));

  // flip the version field inside the JSON header
  std::ifstream in(good, std::ios::binary);
  std::string bytes(std::istreambuf_iterator<char>(in), {});
  const auto pos = bytes.find("\"version\":1");
  REQUIRE(pos != std::string::npos);
  bytes[pos + 10] = '9';
  const auto bad = tmp.path / "badver.rgc";
  std::ofstream(bad, std::ios::binary) << bytes;
  REQUIRE_THROWS_WITH(Trainer::load_checkpoint(bad),
                      Catch::Matchers::ContainsSubstring("version"));
}

TEST_CASE("non-finite losses abort with the offending term named") {
  Trainer t(tiny_config());
  // poison the patch discriminator's output layer so its loss is NaN
  for (double& v : t.d1().params().back()->value)
    v = std::numeric_limits<double>::quiet_NaN();
  auto [x, y] = tiny_batch(6);
  REQUIRE_THROWS_WITH(t.train_step(x, y),
                      Catch::Matchers::ContainsSubstring("d1_loss"));
}

TEST_CASE("train loop with zero iterations returns the initial state") {
  testutil::TempDir tmp("loop0");
  testutil::write_fixture_dataset(tmp.path, 2, 0, 0, 32);
  DatasetManifest m = load_manifest(tmp.path, Split::Train);
  TrainConfig cfg = tiny_config();
  Trainer t(cfg);
  auto before = snapshot(t.generator());
  TrainLoop loop(t, tmp.path, m);
  loop.run(0, nullptr, std::nullopt);
  REQUIRE(t.iteration() == 0);
  REQUIRE(snapshot(t.generator()) == before);
}

TEST_CASE("train loop runs steps and logs one CSV row per iteration") {
  testutil::TempDir tmp("loop");
  testutil::write_fixture_dataset(tmp.path, 3, 0, 0, 32);
  DatasetManifest m = load_manifest(tmp.path, Split::Train);
  TrainConfig cfg = tiny_config();
  Trainer t(cfg);
  std::ostringstream log;
  TrainLoop loop(t, tmp.path, m);
  loop.run(4, &log, std::nullopt);
  REQUIRE(t.iteration() == 4);
  std::istringstream in(log.str());
  std::string line;
  int rows = 0;
  std::getline(in, line);
  REQUIRE(line == TrainLogRecord::csv_header());
  while (std::getline(in, line))
    if (!line.empty()) ++rows;
  REQUIRE(rows == 4);
}

TEST_CASE("two-phase mode trains D1+G first, then D2+G") {
  TrainConfig cfg = tiny_config();
  cfg.two_phase = true;
  cfg.max_iterations = 4;
  Trainer t(cfg);
  auto [x, y] = tiny_batch(7);
  TrainLogRecord first = t.train_step(x, y);
  REQUIRE(first.d2_loss == 0.0);  // D2 inactive in phase one
  REQUIRE(first.k == cfg.k_init);
  t.train_step(x, y);
  TrainLogRecord third = t.train_step(x, y);
  REQUIRE(third.d2_loss != 0.0);  // phase two engaged
}
