#pragma once

// Dataset ingestion: manifest construction from the on-disk layout,
// sample preparation (split / resize / normalize) and deterministic
// batch iteration.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rubbinggan/image.hpp"
#include "rubbinggan/image_io.hpp"

namespace rubbinggan {

enum class Split { Train, Test, Incomplete };

inline const char* split_dir_name(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Test: return "test";
    case Split::Incomplete: return "incomplete";
  }
  return "?";
}

struct ManifestEntry {
  std::string id;
  std::string path;   // relative to the dataset root
  std::string label;  // unicode label, used by the incomplete split
};

struct DatasetManifest {
  Split split = Split::Train;
  PairLayout pair_layout = PairLayout::SourceLeft;
  std::vector<ManifestEntry> entries;

  size_t size() const { return entries.size(); }
};

namespace detail {
inline bool is_image_file(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  return ext == ".png";
}
}  // namespace detail

// Builds the manifest for one split by enumerating PNG files under
// <root>/<split>/ in lexicographic id order. Non-image files are skipped
// with a warning on stderr.
inline DatasetManifest load_manifest(const std::filesystem::path& root,
                                     Split split,
                                     PairLayout layout = PairLayout::SourceLeft) {
  const auto dir = root / split_dir_name(split);
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("load_manifest: missing split directory " +
                             dir.string());
  DatasetManifest m;
  m.split = split;
  m.pair_layout = layout;
  std::set<std::string> seen;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    if (!detail::is_image_file(e.path())) {
      std::cerr << "warning: skipping non-image file " << e.path() << "\n";
      continue;
    }
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) {
    return a.stem().string() < b.stem().string();
  });
  for (const auto& f : files) {
    const std::string id = f.stem().string();
    if (!seen.insert(id).second)
      throw std::runtime_error("load_manifest: duplicate id '" + id + "'");
    m.entries.push_back(
        {id, (std::filesystem::path(split_dir_name(split)) / f.filename())
                 .string(),
         ""});
  }
  return m;
}

inline nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["split"] = split_dir_name(m.split);
  j["pair_layout"] =
      m.pair_layout == PairLayout::SourceLeft ? "source_left" : "source_right";
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries)
    j["entries"].push_back({{"id", e.id}, {"path", e.path}, {"label", e.label}});
  return j;
}

inline DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  const std::string s = j.at("split");
  if (s == "train") m.split = Split::Train;
  else if (s == "test") m.split = Split::Test;
  else if (s == "incomplete") m.split = Split::Incomplete;
  else throw std::runtime_error("manifest_from_json: bad split '" + s + "'");
  m.pair_layout = j.value("pair_layout", "source_left") == "source_right"
                      ? PairLayout::SourceRight
                      : PairLayout::SourceLeft;
  std::set<std::string> seen;
  for (const auto& e : j.at("entries")) {
    ManifestEntry me{e.at("id"), e.at("path"), e.value("label", "")};
    if (!seen.insert(me.id).second)
      throw std::runtime_error("manifest_from_json: duplicate id '" + me.id +
                               "'");
    m.entries.push_back(std::move(me));
  }
  return m;
}

inline void write_manifest(const DatasetManifest& m,
                           const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << manifest_to_json(m).dump(2) << "\n";
}

inline DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read manifest " + path.string());
  nlohmann::json j;
  in >> j;
  return manifest_from_json(j);
}

// Loads one joined pair image and splits it. Orientation is auto-detected:
// width == 2*height means side-by-side, height == 2*width means stacked
// (the stack is rotated into the side-by-side frame by treating top as
// left). Anything else is rejected.
inline PairedSample load_pair(const std::filesystem::path& root,
                              const ManifestEntry& entry, PairLayout layout) {
  GlyphImage joined = load_png(root / entry.path);
  if (joined.height == 2 * joined.width) {
    // stacked vertically: re-pack the two halves side by side
    GlyphImage top(joined.width, joined.width, joined.channels, joined.range);
    GlyphImage bot = top;
    for (int y = 0; y < joined.width; ++y)
      for (int x = 0; x < joined.width; ++x)
        for (int c = 0; c < joined.channels; ++c) {
          top.at(y, x, c) = joined.at(y, x, c);
          bot.at(y, x, c) = joined.at(y + joined.width, x, c);
        }
    joined = hconcat(top, bot);
  }
  PairedSample s = split_pair(joined, layout);
  s.id = entry.id;
  return s;
}

// Resizes both halves to size x size and maps them to the network's
// symmetric range.
inline PairedSample prepare_sample(PairedSample s, int size) {
  s.source = normalize(resize_bilinear(s.source, size, size),
                       ValueRange::Symmetric);
  s.target = normalize(resize_bilinear(s.target, size, size),
                       ValueRange::Symmetric);
  return s;
}

// Deterministic batch iterator. The sequence of entry indices is a pure
// function of (manifest order, seed, shuffle); every epoch visits each
// sample exactly once and the final short batch is emitted.
class BatchIterator {
 public:
  BatchIterator(const DatasetManifest& manifest, int batch_size,
                uint64_t seed, bool shuffle)
      : manifest_(&manifest), batch_size_(batch_size), seed_(seed),
        shuffle_(shuffle) {
    if (batch_size < 1)
      throw std::invalid_argument("BatchIterator: batch_size must be >= 1");
    order_.resize(manifest.entries.size());
    start_epoch();
  }

  // Indices of the next batch within the manifest entry list.
  std::vector<size_t> next_batch() {
    if (cursor_ >= order_.size()) {
      ++epoch_;
      start_epoch();
    }
    const size_t end = std::min(cursor_ + batch_size_, order_.size());
    std::vector<size_t> b(order_.begin() + cursor_, order_.begin() + end);
    cursor_ = end;
    return b;
  }

  size_t batches_per_epoch() const {
    return (order_.size() + batch_size_ - 1) / batch_size_;
  }
  uint64_t epoch() const { return epoch_; }

 private:
  void start_epoch() {
    for (size_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (shuffle_) {
      std::mt19937_64 rng(seed_ ^ (epoch_ * 0x9e3779b97f4a7c15ULL + 1));
      std::shuffle(order_.begin(), order_.end(), rng);
    }
    cursor_ = 0;
  }

  const DatasetManifest* manifest_;
  size_t batch_size_;
  uint64_t seed_;
  bool shuffle_;
  uint64_t epoch_ = 0;
  size_t cursor_ = 0;
  std::vector<size_t> order_;
};

}  // namespace rubbinggan
