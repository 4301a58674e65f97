// rubbinggan CLI: dataset preparation, training, evaluation, restoration.
//
// Exit codes: 0 success, 1 fatal error, 2 partial failure (restore).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rubbinggan/config.hpp"
#include "rubbinggan/dataset.hpp"
#include "rubbinggan/evaluation.hpp"
#include "rubbinggan/restoration.hpp"
#include "rubbinggan/training.hpp"

namespace fs = std::filesystem;
using namespace rubbinggan;

namespace {

fs::path manifest_path(const RunConfig& cfg, Split split) {
  return cfg.output_dir /
         (std::string(split_dir_name(split)) + "_manifest.json");
}

int cmd_prepare(const RunConfig& cfg) {
  if (!fs::is_directory(cfg.dataset_root)) {
    std::cerr << "error: dataset root does not exist: " << cfg.dataset_root
              << "\n";
    return 1;
  }
  fs::create_directories(cfg.output_dir);
  size_t counts[3] = {0, 0, 0};
  bool fatal = false;
  for (Split split : {Split::Train, Split::Test, Split::Incomplete}) {
    DatasetManifest m = load_manifest(cfg.dataset_root, split);
    // validate that every listed image loads and has a usable shape
    for (const auto& e : m.entries) {
      try {
        GlyphImage img = load_png(cfg.dataset_root / e.path);
        if (split != Split::Incomplete && img.width != 2 * img.height &&
            img.height != 2 * img.width)
          throw std::runtime_error("not a joined pair (got " +
                                   std::to_string(img.height) + "x" +
                                   std::to_string(img.width) + ")");
      } catch (const std::exception& ex) {
        std::cerr << "error: malformed image " << e.path << ": " << ex.what()
                  << "\n";
        fatal = true;
      }
    }
    write_manifest(m, manifest_path(cfg, split));
    counts[static_cast<int>(split)] = m.size();
  }
  std::cout << "train=" << counts[0] << " test=" << counts[1]
            << " incomplete=" << counts[2] << "\n";
  return fatal ? 1 : 0;
}

int cmd_train(RunConfig cfg, const std::optional<std::string>& resume) {
  DatasetManifest manifest = read_manifest(manifest_path(cfg, Split::Train));
  if (manifest.entries.empty()) {
    std::cerr << "error: training manifest is empty\n";
    return 1;
  }
  std::optional<Trainer> trainer;
  if (resume) {
    trainer.emplace(Trainer::load_checkpoint(*resume));
    std::cout << "resumed from " << *resume << " at iteration "
              << trainer->iteration() << "\n";
  } else {
    trainer.emplace(cfg.train);
  }
  fs::create_directories(cfg.output_dir);
  const fs::path ckpt = cfg.output_dir / "checkpoint.rgc";
  std::ofstream log(cfg.output_dir / "train_log.csv",
                    resume ? std::ios::app : std::ios::out);
  TrainLoop loop(*trainer, cfg.dataset_root, manifest);
  loop.run(cfg.train.max_iterations, &log, ckpt, &std::cout);
  trainer->save_checkpoint(ckpt);
  std::cout << "trained to iteration " << trainer->iteration()
            << ", checkpoint: " << ckpt << "\n";
  return 0;
}

int cmd_eval(const RunConfig& cfg, const std::string& checkpoint) {
  Trainer trainer = Trainer::load_checkpoint(checkpoint);
  DatasetManifest manifest = read_manifest(manifest_path(cfg, Split::Test));
  StyleSimilarityReport report =
      evaluate_style_similarity(trainer, cfg.dataset_root, manifest);
  fs::create_directories(cfg.output_dir);
  write_report_csv(report, cfg.output_dir / "style_similarity.csv");
  const size_t n = export_generated_set(trainer, cfg.dataset_root, manifest,
                                        cfg.output_dir / "generated");
  std::cout << "evaluated " << report.per_image.size()
            << " images, mean style similarity error = "
            << report.mean_error << "\n"
            << "exported " << n << " generated images to "
            << (cfg.output_dir / "generated") << "\n";
  return 0;
}

int cmd_restore(const RunConfig& cfg, const std::string& checkpoint,
                const std::string& requests_file) {
  Trainer trainer = Trainer::load_checkpoint(checkpoint);
  const fs::path req_path = requests_file;
  auto requests =
      load_request_list(req_path, fs::absolute(req_path).parent_path());
  RestoreSummary summary = restore_batch(trainer, requests, cfg.font_file,
                                         cfg.output_dir / "restored");
  std::cout << summary.succeeded << " restored, " << summary.failures.size()
            << " failed\n";
  for (const auto& [id, reason] : summary.failures)
    std::cerr << "  " << id << ": " << reason << "\n";
  if (!requests.empty() && summary.succeeded == 0) return 1;
  return summary.failures.empty() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RubbingGAN: rubbing-style glyph synthesis and restoration"};
  app.require_subcommand(1);

  std::string config_path = "config.json";
  app.add_option("--config", config_path, "run config file (JSON)")
      ->capture_default_str();

  auto* prepare = app.add_subcommand(
      "prepare", "validate the dataset layout and write split manifests");
  auto* train = app.add_subcommand("train", "train the model");
  std::optional<int> iterations;
  std::optional<uint64_t> seed;
  std::optional<int> image_size;
  std::optional<std::string> resume;
  train->add_option("--iterations", iterations, "override max_iterations");
  train->add_option("--seed", seed, "override seed");
  train->add_option("--image-size", image_size, "override image_size");
  train->add_option("--resume", resume, "resume from a checkpoint file");

  auto* eval = app.add_subcommand(
      "eval", "style-similarity report and generated-set export");
  std::string eval_ckpt;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();

  auto* restore =
      app.add_subcommand("restore", "restore incomplete characters");
  std::string restore_ckpt, requests_file;
  restore->add_option("--checkpoint", restore_ckpt, "checkpoint file")
      ->required();
  restore->add_option("--requests", requests_file,
                      "request list (JSON)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    RunConfig cfg = RunConfig::load(config_path);
    if (iterations) cfg.train.max_iterations = *iterations;
    if (seed) cfg.train.seed = *seed;
    if (image_size) cfg.train.image_size = *image_size;
    std::cout << "config: " << cfg.effective_json().dump() << "\n";
    if (prepare->parsed()) return cmd_prepare(cfg);
    if (train->parsed()) return cmd_train(cfg, resume);
    if (eval->parsed()) return cmd_eval(cfg, eval_ckpt);
    if (restore->parsed())
      return cmd_restore(cfg, restore_ckpt, requests_file);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
