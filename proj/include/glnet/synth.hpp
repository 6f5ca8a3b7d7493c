#pragma once

// Synthetic co-salient dataset generator.
//
// A group's category is a (shape, palette color) pair. Every image of the
// group contains exactly one common-category object at a random position and
// scale (side/diameter uniform in [0.15*S, 0.4*S]) drawn on top, plus 1-3
// distractor objects of strictly different categories, over background
// clutter (bilinear corner-color gradient + per-pixel noise). The mask is
// the common object's rasterized region exactly (binary, nonempty by
// construction: the object lies fully inside the frame and covers at least
// one pixel center at the minimum scale).
//
// The generator returns metadata (category per group, distractor categories
// per image) so tests can verify the "distractors never match the group
// category" contract by exhaustive scan.

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "glnet/rng.hpp"
#include "glnet/tensor.hpp"

namespace glnet {

enum class ShapeKind : int { Disk = 0, Square = 1, Triangle = 2 };

inline const char* shape_kind_name(ShapeKind k) {
  switch (k) {
    case ShapeKind::Disk: return "disk";
    case ShapeKind::Square: return "square";
    case ShapeKind::Triangle: return "triangle";
  }
  return "?";
}

inline constexpr int kSynthShapeCount = 3;
inline constexpr int kSynthColorCount = 6;

// Saturated palette, chosen to stay distinct after the brightness jitter.
inline const float kSynthPalette[kSynthColorCount][3] = {
    {0.85f, 0.15f, 0.15f},  // red
    {0.15f, 0.75f, 0.20f},  // green
    {0.15f, 0.25f, 0.85f},  // blue
    {0.90f, 0.85f, 0.10f},  // yellow
    {0.80f, 0.15f, 0.80f},  // magenta
    {0.10f, 0.80f, 0.80f},  // cyan
};

struct SynthCategory {
  ShapeKind kind = ShapeKind::Disk;
  int color = 0;

  bool operator==(const SynthCategory&) const = default;
  std::string name() const { return std::string(shape_kind_name(kind)) + "-" + std::to_string(color); }
};

struct SynthObject {
  SynthCategory category;
  double cx = 0.0, cy = 0.0;  // center, pixel units
  double size = 0.0;          // diameter / side length
};

struct SynthImageMeta {
  SynthObject common;
  std::vector<SynthObject> distractors;
};

struct SynthGroupMeta {
  SynthCategory category;
  std::vector<SynthImageMeta> images;
};

struct ImageGroup {
  std::string id;
  std::vector<Tensor> images;  // [3,S,S]
  std::vector<Tensor> masks;   // [1,S,S] binary
};

struct SynthConfig {
  int n_groups = 1;
  int group_size = 5;
  int side = 160;
  std::uint64_t seed = 0;
};

namespace detail {

inline bool point_in_object(const SynthObject& o, double px, double py) {
  const double half = o.size / 2.0;
  switch (o.category.kind) {
    case ShapeKind::Disk: {
      const double dx = px - o.cx, dy = py - o.cy;
      return dx * dx + dy * dy <= half * half;
    }
    case ShapeKind::Square:
      return std::abs(px - o.cx) <= half && std::abs(py - o.cy) <= half;
    case ShapeKind::Triangle: {
      // equilateral, apex up, centered at the centroid
      const double hgt = o.size * std::sqrt(3.0) / 2.0;
      const double ax = o.cx, ay = o.cy - 2.0 * hgt / 3.0;
      const double bx = o.cx - o.size / 2.0, by = o.cy + hgt / 3.0;
      const double cx = o.cx + o.size / 2.0, cy = o.cy + hgt / 3.0;
      auto side = [](double x1, double y1, double x2, double y2, double px_, double py_) {
        return (x2 - x1) * (py_ - y1) - (y2 - y1) * (px_ - x1);
      };
      const double d1 = side(ax, ay, bx, by, px, py);
      const double d2 = side(bx, by, cx, cy, px, py);
      const double d3 = side(cx, cy, ax, ay, px, py);
      const bool has_neg = (d1 < 0) || (d2 < 0) || (d3 < 0);
      const bool has_pos = (d1 > 0) || (d2 > 0) || (d3 > 0);
      return !(has_neg && has_pos);
    }
  }
  return false;
}

inline void draw_object(Tensor& image, const SynthObject& o, const float rgb[3]) {
  const int s = image.extent(1);
  const std::int64_t plane = static_cast<std::int64_t>(s) * s;
  float* p = image.data();
  const double half = o.size / 2.0 + 1.0;
  const int y0 = std::max(0, static_cast<int>(std::floor(o.cy - half)));
  const int y1 = std::min(s - 1, static_cast<int>(std::ceil(o.cy + half)));
  const int x0 = std::max(0, static_cast<int>(std::floor(o.cx - half)));
  const int x1 = std::min(s - 1, static_cast<int>(std::ceil(o.cx + half)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      if (!point_in_object(o, x + 0.5, y + 0.5)) continue;
      for (int c = 0; c < 3; ++c) {
        p[c * plane + static_cast<std::int64_t>(y) * s + x] = rgb[c];
      }
    }
  }
}

inline void rasterize_mask(Tensor& mask, const SynthObject& o) {
  const int s = mask.extent(1);
  float* p = mask.data();
  for (int y = 0; y < s; ++y) {
    for (int x = 0; x < s; ++x) {
      if (point_in_object(o, x + 0.5, y + 0.5)) {
        p[static_cast<std::int64_t>(y) * s + x] = 1.0f;
      }
    }
  }
}

inline SynthObject random_object(Rng& rng, const SynthCategory& cat, int s) {
  SynthObject o;
  o.category = cat;
  o.size = rng.uniform(0.15 * s, 0.4 * s);
  const double margin = o.size / 2.0 + 2.0;
  o.cx = rng.uniform(margin, s - margin);
  o.cy = rng.uniform(margin, s - margin);
  return o;
}

inline SynthCategory random_category_excluding(Rng& rng, const SynthCategory& avoid) {
  // uniform over the other shape x color combinations
  for (;;) {
    SynthCategory c;
    c.kind = static_cast<ShapeKind>(rng.uniform_int(kSynthShapeCount));
    c.color = static_cast<int>(rng.uniform_int(kSynthColorCount));
    if (!(c == avoid)) return c;
  }
}

}  // namespace detail

inline void synth_render_image(Rng& rng, int s, const SynthCategory& category,
                               Tensor& image, Tensor& mask, SynthImageMeta& meta) {
  image = Tensor::zeros({3, s, s});
  mask = Tensor::zeros({1, s, s});
  // Background: bilinear blend of four random corner colors plus noise.
  float corners[4][3];
  for (auto& corner : corners) {
    for (float& ch : corner) ch = static_cast<float>(rng.uniform(0.05, 0.95));
  }
  const std::int64_t plane = static_cast<std::int64_t>(s) * s;
  float* p = image.data();
  for (int y = 0; y < s; ++y) {
    const double fy = static_cast<double>(y) / (s - 1);
    for (int x = 0; x < s; ++x) {
      const double fx = static_cast<double>(x) / (s - 1);
      const double noise = rng.uniform(-0.05, 0.05);
      for (int c = 0; c < 3; ++c) {
        const double top = (1.0 - fx) * corners[0][c] + fx * corners[1][c];
        const double bot = (1.0 - fx) * corners[2][c] + fx * corners[3][c];
        double v = (1.0 - fy) * top + fy * bot + noise;
        p[c * plane + static_cast<std::int64_t>(y) * s + x] =
            static_cast<float>(std::min(1.0, std::max(0.0, v)));
      }
    }
  }
  // Distractors first, common object last so the mask is exactly its region.
  const int n_distractors = 1 + static_cast<int>(rng.uniform_int(3));
  meta.distractors.clear();
  for (int i = 0; i < n_distractors; ++i) {
    const SynthCategory dc = detail::random_category_excluding(rng, category);
    const SynthObject obj = detail::random_object(rng, dc, s);
    float rgb[3];
    const double jitter = rng.uniform(-0.08, 0.08);
    for (int c = 0; c < 3; ++c) {
      rgb[c] = static_cast<float>(std::min(
          1.0, std::max(0.0, static_cast<double>(kSynthPalette[dc.color][c]) + jitter)));
    }
    detail::draw_object(image, obj, rgb);
    meta.distractors.push_back(obj);
  }
  const SynthObject common = detail::random_object(rng, category, s);
  float rgb[3];
  const double jitter = rng.uniform(-0.08, 0.08);
  for (int c = 0; c < 3; ++c) {
    rgb[c] = static_cast<float>(std::min(
        1.0, std::max(0.0, static_cast<double>(kSynthPalette[category.color][c]) + jitter)));
  }
  detail::draw_object(image, common, rgb);
  detail::rasterize_mask(mask, common);
  meta.common = common;
}

inline std::vector<ImageGroup> synth_dataset(const SynthConfig& cfg,
                                             std::vector<SynthGroupMeta>* meta_out = nullptr) {
  check(cfg.n_groups >= 1, "synth: n_groups must be >= 1");
  check(cfg.group_size >= 2, "synth: group_size must be >= 2");
  check(cfg.side >= 16, "synth: side must be >= 16");
  Rng rng(cfg.seed);
  std::vector<ImageGroup> groups;
  if (meta_out) meta_out->clear();
  for (int gi = 0; gi < cfg.n_groups; ++gi) {
    SynthGroupMeta gmeta;
    gmeta.category.kind = static_cast<ShapeKind>(rng.uniform_int(kSynthShapeCount));
    gmeta.category.color = static_cast<int>(rng.uniform_int(kSynthColorCount));
    ImageGroup group;
    {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "group_%03d", gi);
      group.id = buf;
    }
    for (int ii = 0; ii < cfg.group_size; ++ii) {
      Tensor image, mask;
      SynthImageMeta imeta;
      synth_render_image(rng, cfg.side, gmeta.category, image, mask, imeta);
      group.images.push_back(image);
      group.masks.push_back(mask);
      gmeta.images.push_back(imeta);
    }
    groups.push_back(std::move(group));
    if (meta_out) meta_out->push_back(std::move(gmeta));
  }
  return groups;
}

}  // namespace glnet
