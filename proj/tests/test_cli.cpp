#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <string>

#include <nlohmann/json.hpp>

#include "helpers.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_binary() {
  const char* env = std::getenv("RUBBINGGAN_CLI");
  REQUIRE(env != nullptr);  // set by the test harness
  return env;
}

// Runs the CLI, returning the exit code; stdout/stderr go to `log`.
int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd =
      cli_binary() + " " + args + " >" + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

void write_config(const fs::path& path, const fs::path& dataset_root,
                  const fs::path& output_dir, int iterations) {
  nlohmann::json j = {{"dataset_root", dataset_root.string()},
                      {"output_dir", output_dir.string()},
                      {"font_file", testutil::kTestFont},
                      {"image_size", 16},
                      {"g_base_channels", 4},
                      {"g_max_channels", 8},
                      {"d1_base_channels", 4},
                      {"d2_base_channels", 4},
                      {"d2_embedding_dim", 8},
                      {"max_iterations", iterations},
                      {"checkpoint_interval", 100},
                      {"seed", 7}};
  std::ofstream(path) << j.dump(2);
}

}  // namespace

TEST_CASE("prepare validates the layout and writes manifests") {
  testutil::TempDir tmp("cliprep");
  testutil::write_fixture_dataset(tmp.path / "data", 3, 2, 1, 32);
  write_config(tmp.path / "config.json", tmp.path / "data", tmp.path / "out", 2);
  const auto log = tmp.path / "log.txt";
  const std::string base = "--config " + (tmp.path / "config.json").string();

  REQUIRE(run_cli(base + " prepare", log) == 0);
  const std::string out = slurp(log);
  REQUIRE(out.find("train=3 test=2 incomplete=1") != std::string::npos);
  REQUIRE(fs::exists(tmp.path / "out" / "train_manifest.json"));
  REQUIRE(fs::exists(tmp.path / "out" / "test_manifest.json"));
  REQUIRE(fs::exists(tmp.path / "out" / "incomplete_manifest.json"));

  // idempotent: a second run succeeds and leaves identical manifests
  const std::string before = slurp(tmp.path / "out" / "train_manifest.json");
  REQUIRE(run_cli(base + " prepare", log) == 0);
  REQUIRE(slurp(tmp.path / "out" / "train_manifest.json") == before);
}

TEST_CASE("prepare fails on a malformed pair image") {
  testutil::TempDir tmp("clibadpair");
  testutil::write_fixture_dataset(tmp.path / "data", 2, 0, 0, 32);
  // a square (unpaired) image in the train split is a layout error
  rubbinggan::save_png(testutil::synth_glyph(32, 5),
                       tmp.path / "data" / "train" / "square.png");
  write_config(tmp.path / "config.json", tmp.path / "data", tmp.path / "out", 2);
  const auto log = tmp.path / "log.txt";
  REQUIRE(run_cli("--config " + (tmp.path / "config.json").string() +
                      " prepare",
                  log) == 1);
  REQUIRE(slurp(log).find("square.png") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected") {
  testutil::TempDir tmp("clibadkey");
  std::ofstream(tmp.path / "config.json")
      << R"({"dataset_root": "data", "learning_rte": 0.01})";
  const auto log = tmp.path / "log.txt";
  REQUIRE(run_cli("--config " + (tmp.path / "config.json").string() +
                      " prepare",
                  log) == 1);
  REQUIRE(slurp(log).find("learning_rte") != std::string::npos);
}

TEST_CASE("missing dataset root is a fatal error") {
  testutil::TempDir tmp("clinoroot");
  write_config(tmp.path / "config.json", tmp.path / "nothere",
               tmp.path / "out", 2);
  const auto log = tmp.path / "log.txt";
  REQUIRE(run_cli("--config " + (tmp.path / "config.json").string() +
                      " prepare",
                  log) == 1);
}

TEST_CASE("train, eval and restore run end to end with documented exits") {
  testutil::TempDir tmp("clipipe");
  testutil::write_fixture_dataset(tmp.path / "data", 3, 2, 1, 32);
  write_config(tmp.path / "config.json", tmp.path / "data", tmp.path / "out", 2);
  const auto log = tmp.path / "log.txt";
  const std::string base = "--config " + (tmp.path / "config.json").string();

  REQUIRE(run_cli(base + " prepare", log) == 0);
  REQUIRE(run_cli(base + " train", log) == 0);
  const fs::path ckpt = tmp.path / "out" / "checkpoint.rgc";
  REQUIRE(fs::exists(ckpt));
  REQUIRE(fs::exists(tmp.path / "out" / "train_log.csv"));

  // two more iterations on top of the checkpoint
  REQUIRE(run_cli(base + " train --iterations 4 --resume " + ckpt.string(),
                  log) == 0);
  REQUIRE(slurp(log).find("iteration 4") != std::string::npos);

  REQUIRE(run_cli(base + " eval --checkpoint " + ckpt.string(), log) == 0);
  REQUIRE(fs::exists(tmp.path / "out" / "style_similarity.csv"));
  REQUIRE(fs::exists(tmp.path / "out" / "generated" / "te000.png"));
  REQUIRE(fs::exists(tmp.path / "out" / "generated" / "te001.png"));

  // restore: one resolvable codepoint, one missing -> partial failure (2)
  nlohmann::json reqs = nlohmann::json::array(
      {{{"id", "ok"}, {"incomplete", "data/incomplete/in000.png"},
        {"codepoint", 65}},
       {{"id", "missing"}, {"incomplete", "data/incomplete/in000.png"},
        {"codepoint", 0x10FFF0}}});
  std::ofstream(tmp.path / "requests.json") << reqs.dump(2);
  REQUIRE(run_cli(base + " restore --checkpoint " + ckpt.string() +
                      " --requests " + (tmp.path / "requests.json").string(),
                  log) == 2);
  REQUIRE(fs::exists(tmp.path / "out" / "restored" / "ok_restored.png"));
  REQUIRE(fs::exists(tmp.path / "out" / "restored" / "ok_overlay.png"));
  REQUIRE(fs::exists(tmp.path / "out" / "restored" / "summary.json"));

  // all requests failing exits 1
  nlohmann::json allbad = nlohmann::json::array(
      {{{"id", "nope"}, {"incomplete", "data/incomplete/in000.png"},
        {"codepoint", 0x10FFF0}}});
  std::ofstream(tmp.path / "bad_requests.json") << allbad.dump(2);
  REQUIRE(run_cli(base + " restore --checkpoint " + ckpt.string() +
                      " --requests " +
                      (tmp.path / "bad_requests.json").string(),
                  log) == 1);
}
