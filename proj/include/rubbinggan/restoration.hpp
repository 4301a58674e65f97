#pragma once

// End-to-end restoration: an incomplete rubbing character plus its
// human-identified label (a codepoint to render from a standard font, or
// an explicit reference-glyph image) produce the restored rubbing-style
// glyph, the damage mask, and the diagnostic overlay.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rubbinggan/evaluation.hpp"
#include "rubbinggan/image.hpp"
#include "rubbinggan/image_io.hpp"
#include "rubbinggan/training.hpp"
#include "rubbinggan/ttf.hpp"

namespace rubbinggan {

struct RestorationRequest {
  std::string id;
  GlyphImage incomplete;               // byte range, black background
  std::optional<uint32_t> codepoint;   // resolved against font_file
  std::optional<GlyphImage> reference; // explicit reference glyph, byte range
};

struct RestorationResult {
  std::string id;
  GlyphImage restored;  // byte range, checkpoint image size
  GlyphImage overlay;
  DamageMask mask;
};

// Renders a codepoint as a black glyph centered on a white square raster,
// scaled to 80% of the square. The same renderer must be used if training
// pairs are ever regenerated, so the geometry matches between training
// and restoration.
inline GlyphImage render_reference_glyph(uint32_t codepoint,
                                         const std::filesystem::path& font_file,
                                         int size) {
  TrueTypeFont font(font_file);
  if (!font.has_codepoint(codepoint)) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04X", codepoint);
    throw FontError("codepoint U+" + std::string(buf) +
                    " not present in font " + font_file.string());
  }
  const std::vector<double> cover = font.rasterize(codepoint, size, 0.8);
  GlyphImage img(size, size, 3, ValueRange::Byte);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x) {
      const double v = 255.0 * (1.0 - cover[static_cast<size_t>(y) * size + x]);
      img.at(y, x, 0) = img.at(y, x, 1) = img.at(y, x, 2) = v;
    }
  return img;
}

// Resolves the request's reference glyph, runs the generator, and
// computes the damage diagnostics against the upscaled incomplete image.
inline RestorationResult restore_character(Trainer& trainer,
                                           const RestorationRequest& request,
                                           const std::filesystem::path& font_file) {
  const int size = trainer.config().image_size;
  GlyphImage reference =
      request.reference
          ? *request.reference
          : render_reference_glyph(request.codepoint.value(), font_file, size);
  RestorationResult result;
  result.id = request.id;
  result.restored = generate_glyph(trainer, reference);
  GlyphImage incomplete_up =
      resize_bilinear(request.incomplete, size, size);
  result.mask = damage_mask(result.restored, incomplete_up);
  result.overlay = render_mask_overlay(result.restored, result.mask);
  return result;
}

struct RestoreSummary {
  size_t succeeded = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // id, reason
};

// Restores every request, writing <id>_restored.png and <id>_overlay.png.
// Per-request failures are collected, not fatal to the batch.
inline RestoreSummary restore_batch(Trainer& trainer,
                                    const std::vector<RestorationRequest>& requests,
                                    const std::filesystem::path& font_file,
                                    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  RestoreSummary summary;
  nlohmann::json results = nlohmann::json::array();
  for (const auto& req : requests) {
    try {
      RestorationResult r = restore_character(trainer, req, font_file);
      save_png(r.restored, out_dir / (req.id + "_restored.png"));
      save_png(r.overlay, out_dir / (req.id + "_overlay.png"));
      results.push_back({{"id", req.id},
                         {"status", "ok"},
                         {"marked_pixels", r.mask.marked_count()}});
      ++summary.succeeded;
    } catch (const std::exception& e) {
      summary.failures.emplace_back(req.id, e.what());
      results.push_back(
          {{"id", req.id}, {"status", "failed"}, {"reason", e.what()}});
    }
  }
  nlohmann::json j = {{"succeeded", summary.succeeded},
                      {"failed", summary.failures.size()},
                      {"results", results}};
  std::ofstream out(out_dir / "summary.json");
  out << j.dump(2) << "\n";
  return summary;
}

// Request list file: JSON array of {id, incomplete, codepoint | glyph}.
// `codepoint` is either a number or a string holding one unicode
// character; paths are resolved relative to `base_dir`.
inline std::vector<RestorationRequest> load_request_list(
    const std::filesystem::path& path, const std::filesystem::path& base_dir) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot read request list " + path.string());
  nlohmann::json j;
  in >> j;
  std::vector<RestorationRequest> out;
  for (const auto& e : j) {
    RestorationRequest r;
    r.id = e.at("id");
    r.incomplete = load_png(base_dir / e.at("incomplete").get<std::string>());
    if (e.contains("codepoint")) {
      if (e["codepoint"].is_number()) {
        r.codepoint = e["codepoint"].get<uint32_t>();
      } else {
        // decode the first UTF-8 character of the string
        const std::string s = e["codepoint"];
        if (s.empty()) throw std::runtime_error("empty codepoint for " + r.id);
        const auto b0 = static_cast<unsigned char>(s[0]);
        uint32_t cp = 0;
        if (b0 < 0x80) cp = b0;
        else if ((b0 >> 5) == 6) cp = (b0 & 31) << 6 | (s.at(1) & 63);
        else if ((b0 >> 4) == 14)
          cp = (b0 & 15) << 12 | (s.at(1) & 63) << 6 | (s.at(2) & 63);
        else
          cp = (b0 & 7) << 18 | (s.at(1) & 63) << 12 | (s.at(2) & 63) << 6 |
               (s.at(3) & 63);
        r.codepoint = cp;
      }
    } else if (e.contains("glyph")) {
      r.reference = load_png(base_dir / e.at("glyph").get<std::string>());
    } else {
      throw std::runtime_error("request " + r.id +
                               " needs either 'codepoint' or 'glyph'");
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace rubbinggan
