#pragma once

// Run configuration file: a single JSON document shared by all CLI
// subcommands. Unknown keys are rejected to catch typos; defaults are
// applied for absent keys and echoed by the CLI. Relative paths are
// resolved against the config file's directory.

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "rubbinggan/training.hpp"

namespace rubbinggan {

struct RunConfig {
  std::filesystem::path dataset_root = "dataset";
  std::filesystem::path output_dir = "out";
  std::filesystem::path font_file;
  TrainConfig train;

  static const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys = {
        "dataset_root", "output_dir", "font_file", "learning_rate", "beta1",
        "beta2", "batch_size", "max_iterations", "seed", "image_size",
        "g_base_channels", "g_max_channels", "d1_base_channels",
        "d2_base_channels", "d2_embedding_dim", "gamma", "lambda_k",
        "k_init", "lambda_l1", "checkpoint_interval", "two_phase"};
    return keys;
  }

  static RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
      throw std::runtime_error("cannot read config file " + path.string());
    nlohmann::json j;
    in >> j;
    for (const auto& [key, _] : j.items())
      if (!known_keys().count(key))
        throw std::runtime_error("unknown config key '" + key + "' in " +
                                 path.string());
    RunConfig c;
    c.train = TrainConfig::from_json(j);
    const auto base = std::filesystem::absolute(path).parent_path();
    auto resolve = [&base](const std::string& p) {
      std::filesystem::path fp(p);
      return fp.is_absolute() ? fp : base / fp;
    };
    c.dataset_root = resolve(j.value("dataset_root", "dataset"));
    c.output_dir = resolve(j.value("output_dir", "out"));
    if (j.contains("font_file"))
      c.font_file = resolve(j["font_file"].get<std::string>());
    return c;
  }

  nlohmann::json effective_json() const {
    nlohmann::json j = train.to_json();
    j["dataset_root"] = dataset_root.string();
    j["output_dir"] = output_dir.string();
    j["font_file"] = font_file.string();
    return j;
  }
};

}  // namespace rubbinggan
