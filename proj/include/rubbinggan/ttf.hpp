#pragma once

// Minimal TrueType glyph rasterizer: enough of the sfnt format (cmap
// formats 4/12, loca, glyf with simple and composite glyphs, quadratic
// outlines) to render a single codepoint to a bitmap. Scanline fill with
// the non-zero winding rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace rubbinggan {

class FontError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrueTypeFont {
 public:
  explicit TrueTypeFont(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
      throw FontError("font file not found: " + path.string() +
                      " (an explicit reference-glyph image can be supplied "
                      "instead of a codepoint)");
    data_.assign(std::istreambuf_iterator<char>(in),
                 std::istreambuf_iterator<char>());
    parse(path.string());
  }

  bool has_codepoint(uint32_t cp) const { return glyph_index(cp) != 0; }

  int units_per_em() const { return units_per_em_; }

  struct Point {
    double x, y;
    bool on_curve;
  };
  using Contour = std::vector<Point>;

  // Outline in font units, composites resolved.
  std::vector<Contour> glyph_outline(uint32_t cp) const {
    const uint16_t gid = glyph_index(cp);
    if (gid == 0)
      throw FontError("codepoint U+" + hex(cp) + " not present in font");
    std::vector<Contour> contours;
    append_glyph(gid, 1, 0, 0, 1, 0, 0, contours, 0);
    return contours;
  }

  // Rasterizes the codepoint as ink coverage on a size x size grid: the
  // glyph bounding box is scaled to `scale` of the square and centered.
  // Returns row-major coverage in [0,1], row 0 at the top.
  std::vector<double> rasterize(uint32_t cp, int size,
                                double scale = 0.8) const {
    auto contours = glyph_outline(cp);
    std::vector<double> out(static_cast<size_t>(size) * size, 0.0);
    double minx = 1e30, miny = 1e30, maxx = -1e30, maxy = -1e30;
    std::vector<std::vector<std::pair<double, double>>> polys;
    for (const auto& c : contours) {
      auto poly = flatten(c);
      for (auto [x, y] : poly) {
        minx = std::min(minx, x); maxx = std::max(maxx, x);
        miny = std::min(miny, y); maxy = std::max(maxy, y);
      }
      polys.push_back(std::move(poly));
    }
    if (polys.empty() || maxx <= minx || maxy <= miny) return out;
    const double extent = std::max(maxx - minx, maxy - miny);
    const double s = scale * size / extent;
    const double ox = (size - (maxx - minx) * s) / 2.0 - minx * s;
    const double oy = (size - (maxy - miny) * s) / 2.0 - miny * s;
    // map to pixel space, flipping y (font y grows upward)
    for (auto& poly : polys)
      for (auto& [x, y] : poly) {
        x = x * s + ox;
        y = size - (y * s + oy);
      }
    // 4x vertical supersampling, non-zero winding per scanline
    const int ss = 4;
    std::vector<std::pair<double, int>> xs;  // crossing x, winding delta
    for (int py = 0; py < size; ++py) {
      for (int sub = 0; sub < ss; ++sub) {
        const double sy = py + (sub + 0.5) / ss;
        xs.clear();
        for (const auto& poly : polys) {
          const size_t n = poly.size();
          for (size_t i = 0; i < n; ++i) {
            const auto& a = poly[i];
            const auto& b = poly[(i + 1) % n];
            if ((a.second <= sy && b.second > sy) ||
                (b.second <= sy && a.second > sy)) {
              const double t = (sy - a.second) / (b.second - a.second);
              xs.emplace_back(a.first + t * (b.first - a.first),
                              b.second > a.second ? 1 : -1);
            }
          }
        }
        std::sort(xs.begin(), xs.end());
        int winding = 0;
        for (size_t i = 0; i + 1 <= xs.size(); ++i) {
          winding += xs[i].second;
          if (winding != 0 && i + 1 < xs.size()) {
            const double x0 = std::clamp(xs[i].first, 0.0, double(size));
            const double x1 =
                std::clamp(xs[i + 1].first, 0.0, double(size));
            for (int px = static_cast<int>(std::floor(x0));
                 px < size && px < std::ceil(x1); ++px) {
              const double cover = std::min<double>(px + 1, x1) -
                                   std::max<double>(px, x0);
              if (cover > 0)
                out[static_cast<size_t>(py) * size + px] += cover / ss;
            }
          }
        }
      }
    }
    for (double& v : out) v = std::clamp(v, 0.0, 1.0);
    return out;
  }

 private:
  // ---- sfnt plumbing ----
  uint8_t u8(size_t off) const {
    if (off >= data_.size()) throw FontError("truncated font file");
    return static_cast<uint8_t>(data_[off]);
  }
  uint16_t u16(size_t off) const { return (u8(off) << 8) | u8(off + 1); }
  int16_t s16(size_t off) const { return static_cast<int16_t>(u16(off)); }
  uint32_t u32(size_t off) const {
    return (static_cast<uint32_t>(u16(off)) << 16) | u16(off + 2);
  }
  static std::string hex(uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04X", v);
    return buf;
  }

  void parse(const std::string& name) {
    const uint32_t ver = u32(0);
    if (ver != 0x00010000 && ver != 0x74727565)  // 'true'
      throw FontError("not a TrueType font: " + name);
    const uint16_t num_tables = u16(4);
    for (uint16_t i = 0; i < num_tables; ++i) {
      const size_t rec = 12 + 16 * static_cast<size_t>(i);
      std::string tag(data_.begin() + rec, data_.begin() + rec + 4);
      tables_[tag] = {u32(rec + 8), u32(rec + 12)};
    }
    for (const char* t : {"head", "cmap", "loca", "glyf", "maxp"})
      if (!tables_.count(t))
        throw FontError("font lacks required table '" + std::string(t) +
                        "': " + name);
    const size_t head = tables_.at("head").first;
    units_per_em_ = u16(head + 18);
    long_loca_ = s16(head + 50) != 0;
    num_glyphs_ = u16(tables_.at("maxp").first + 4);
    parse_cmap();
  }

  void parse_cmap() {
    const size_t cmap = tables_.at("cmap").first;
    const uint16_t n = u16(cmap + 2);
    size_t best = 0;
    int best_rank = -1;
    for (uint16_t i = 0; i < n; ++i) {
      const size_t rec = cmap + 4 + 8 * static_cast<size_t>(i);
      const uint16_t plat = u16(rec), enc = u16(rec + 2);
      const size_t sub = cmap + u32(rec + 4);
      const uint16_t fmt = u16(sub);
      int rank = -1;
      if (plat == 3 && enc == 10 && fmt == 12) rank = 4;
      else if (plat == 0 && fmt == 12) rank = 3;
      else if (plat == 3 && enc == 1 && fmt == 4) rank = 2;
      else if (plat == 0 && fmt == 4) rank = 1;
      if (rank > best_rank) {
        best_rank = rank;
        best = sub;
      }
    }
    if (best_rank < 0) throw FontError("no usable cmap subtable");
    cmap_sub_ = best;
    cmap_fmt_ = u16(best);
  }

  uint16_t glyph_index(uint32_t cp) const {
    if (cmap_fmt_ == 4) {
      if (cp > 0xFFFF) return 0;
      const size_t t = cmap_sub_;
      const uint16_t segs2 = u16(t + 6);
      const size_t ends = t + 14, starts = ends + segs2 + 2,
                   deltas = starts + segs2, ranges = deltas + segs2;
      for (uint16_t i = 0; i < segs2; i += 2) {
        if (u16(ends + i) >= cp) {
          if (u16(starts + i) > cp) return 0;
          const uint16_t ro = u16(ranges + i);
          if (ro == 0)
            return static_cast<uint16_t>(cp + u16(deltas + i));
          const size_t gi = ranges + i + ro + 2 * (cp - u16(starts + i));
          const uint16_t g = u16(gi);
          return g == 0 ? 0 : static_cast<uint16_t>(g + u16(deltas + i));
        }
      }
      return 0;
    }
    // format 12
    const uint32_t ngroups = u32(cmap_sub_ + 12);
    size_t lo = 0, hi = ngroups;
    while (lo < hi) {
      const size_t mid = (lo + hi) / 2;
      const size_t g = cmap_sub_ + 16 + 12 * mid;
      if (cp < u32(g)) hi = mid;
      else if (cp > u32(g + 4)) lo = mid + 1;
      else return static_cast<uint16_t>(u32(g + 8) + (cp - u32(g)));
    }
    return 0;
  }

  std::pair<size_t, size_t> glyf_range(uint16_t gid) const {
    const size_t loca = tables_.at("loca").first;
    size_t a, b;
    if (long_loca_) {
      a = u32(loca + 4 * static_cast<size_t>(gid));
      b = u32(loca + 4 * static_cast<size_t>(gid) + 4);
    } else {
      a = 2 * static_cast<size_t>(u16(loca + 2 * static_cast<size_t>(gid)));
      b = 2 * static_cast<size_t>(u16(loca + 2 * static_cast<size_t>(gid) + 2));
    }
    return {tables_.at("glyf").first + a, b - a};
  }

  // Appends the outline of `gid`, transformed by [a b; c d] + (e, f).
  void append_glyph(uint16_t gid, double a, double b, double c, double d,
                    double e, double f, std::vector<Contour>& out,
                    int depth) const {
    if (depth > 8) throw FontError("composite glyph nesting too deep");
    if (gid >= num_glyphs_) return;
    auto [off, len] = glyf_range(gid);
    if (len == 0) return;  // empty glyph (e.g. space)
    const int ncont = s16(off);
    if (ncont >= 0) {
      append_simple(off, ncont, a, b, c, d, e, f, out);
      return;
    }
    // composite
    size_t p = off + 10;
    while (true) {
      const uint16_t flags = u16(p);
      const uint16_t cgid = u16(p + 2);
      p += 4;
      double dx, dy;
      if (flags & 1) {  // ARG_1_AND_2_ARE_WORDS
        dx = s16(p);
        dy = s16(p + 2);
        p += 4;
      } else {
        dx = static_cast<int8_t>(u8(p));
        dy = static_cast<int8_t>(u8(p + 1));
        p += 2;
      }
      double ca = 1, cb = 0, cc = 0, cd = 1;
      if (flags & 8) {  // WE_HAVE_A_SCALE
        ca = cd = f2dot14(p);
        p += 2;
      } else if (flags & 0x40) {  // X_AND_Y_SCALE
        ca = f2dot14(p);
        cd = f2dot14(p + 2);
        p += 4;
      } else if (flags & 0x80) {  // 2x2 matrix
        ca = f2dot14(p);
        cb = f2dot14(p + 2);
        cc = f2dot14(p + 4);
        cd = f2dot14(p + 6);
        p += 8;
      }
      // compose child transform with the parent's
      append_glyph(cgid, a * ca + c * cb, b * ca + d * cb, a * cc + c * cd,
                   b * cc + d * cd, a * dx + c * dy + e, b * dx + d * dy + f,
                   out, depth + 1);
      if (!(flags & 0x20)) break;  // MORE_COMPONENTS
    }
  }

  double f2dot14(size_t off) const { return s16(off) / 16384.0; }

  void append_simple(size_t off, int ncont, double a, double b, double c,
                     double d, double e, double f,
                     std::vector<Contour>& out) const {
    std::vector<uint16_t> ends(ncont);
    size_t p = off + 10;
    for (int i = 0; i < ncont; ++i, p += 2) ends[i] = u16(p);
    const int npts = ncont == 0 ? 0 : ends.back() + 1;
    const uint16_t ilen = u16(p);
    p += 2 + ilen;  // skip instructions
    std::vector<uint8_t> flags;
    flags.reserve(npts);
    while (static_cast<int>(flags.size()) < npts) {
      const uint8_t fl = u8(p++);
      flags.push_back(fl);
      if (fl & 8) {  // REPEAT
        uint8_t rep = u8(p++);
        while (rep--) flags.push_back(fl);
      }
    }
    std::vector<double> xs(npts), ys(npts);
    double v = 0;
    for (int i = 0; i < npts; ++i) {
      const uint8_t fl = flags[i];
      if (fl & 2) {
        const uint8_t dx = u8(p++);
        v += (fl & 16) ? dx : -double(dx);
      } else if (!(fl & 16)) {
        v += s16(p);
        p += 2;
      }
      xs[i] = v;
    }
    v = 0;
    for (int i = 0; i < npts; ++i) {
      const uint8_t fl = flags[i];
      if (fl & 4) {
        const uint8_t dy = u8(p++);
        v += (fl & 32) ? dy : -double(dy);
      } else if (!(fl & 32)) {
        v += s16(p);
        p += 2;
      }
      ys[i] = v;
    }
    int start = 0;
    for (int ci = 0; ci < ncont; ++ci) {
      Contour cont;
      for (int i = start; i <= ends[ci]; ++i) {
        const double x = xs[i], y = ys[i];
        cont.push_back({a * x + c * y + e, b * x + d * y + f,
                        (flags[i] & 1) != 0});
      }
      start = ends[ci] + 1;
      if (!cont.empty()) out.push_back(std::move(cont));
    }
  }

  // Expands implied on-curve midpoints and flattens quadratics.
  static std::vector<std::pair<double, double>> flatten(const Contour& c) {
    // normalize: build list alternating on/off with implied midpoints
    std::vector<Point> pts;
    const size_t n = c.size();
    for (size_t i = 0; i < n; ++i) {
      const Point& cur = c[i];
      const Point& next = c[(i + 1) % n];
      pts.push_back(cur);
      if (!cur.on_curve && !next.on_curve)
        pts.push_back({(cur.x + next.x) / 2, (cur.y + next.y) / 2, true});
    }
    // rotate so pts[0] is on-curve
    const auto it = std::find_if(pts.begin(), pts.end(),
                                 [](const Point& p) { return p.on_curve; });
    if (it == pts.end()) {
      // all off-curve: synthesize a start point
      pts.insert(pts.begin(),
                 {(pts.front().x + pts.back().x) / 2,
                  (pts.front().y + pts.back().y) / 2, true});
    } else {
      std::rotate(pts.begin(), it, pts.end());
    }
    std::vector<std::pair<double, double>> poly;
    const size_t m = pts.size();
    constexpr int kSegs = 8;
    size_t i = 0;
    while (i < m) {
      const Point& p0 = pts[i];
      poly.emplace_back(p0.x, p0.y);
      const Point& p1 = pts[(i + 1) % m];
      if (p1.on_curve) {
        i += 1;
      } else {
        const Point& p2 = pts[(i + 2) % m];  // on-curve by construction
        for (int s = 1; s < kSegs; ++s) {
          const double t = static_cast<double>(s) / kSegs;
          const double u = 1 - t;
          poly.emplace_back(u * u * p0.x + 2 * u * t * p1.x + t * t * p2.x,
                            u * u * p0.y + 2 * u * t * p1.y + t * t * p2.y);
        }
        i += 2;
      }
    }
    return poly;
  }

  std::vector<char> data_;
  std::map<std::string, std::pair<uint32_t, uint32_t>> tables_;
  int units_per_em_ = 1000;
  bool long_loca_ = false;
  uint16_t num_glyphs_ = 0;
  size_t cmap_sub_ = 0;
  uint16_t cmap_fmt_ = 0;
};

}  // namespace rubbinggan
