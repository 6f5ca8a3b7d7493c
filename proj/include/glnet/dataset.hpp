#pragma once

// On-disk dataset layout:
//
//   root/
//     <group-id>/
//       <image-id>.ppm      P6 color image
//       <image-id>_gt.pgm   P5 binary mask (pixels 0 or 255)
//
// Groups and images are discovered by directory scan and returned sorted by
// name so that every run sees the same order. Predictions mirror the layout
// under a separate root as <group-id>/<image-id>.pgm.

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "glnet/image_io.hpp"
#include "glnet/synth.hpp"
#include "glnet/tensor.hpp"

namespace glnet {

struct DiskImageEntry {
  std::string id;              // file stem without the _gt suffix
  std::filesystem::path image;  // .ppm
  std::filesystem::path mask;   // _gt.pgm (may be empty if absent)
};

struct DiskGroup {
  std::string id;
  std::vector<DiskImageEntry> entries;
};

inline std::vector<DiskGroup> scan_dataset(const std::filesystem::path& root,
                                           bool require_masks = true) {
  namespace fs = std::filesystem;
  check(fs::exists(root), "dataset: root does not exist: " + root.string(), IoError{""});
  check(fs::is_directory(root), "dataset: root is not a directory: " + root.string(), IoError{""});
  std::vector<DiskGroup> groups;
  std::vector<fs::path> group_dirs;
  for (const auto& e : fs::directory_iterator(root)) {
    if (e.is_directory()) group_dirs.push_back(e.path());
  }
  std::sort(group_dirs.begin(), group_dirs.end());
  for (const auto& dir : group_dirs) {
    DiskGroup group;
    group.id = dir.filename().string();
    std::vector<fs::path> ppms;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file() && e.path().extension() == ".ppm") ppms.push_back(e.path());
    }
    std::sort(ppms.begin(), ppms.end());
    for (const auto& ppm : ppms) {
      DiskImageEntry entry;
      entry.id = ppm.stem().string();
      entry.image = ppm;
      fs::path gt = dir / (entry.id + "_gt.pgm");
      if (fs::exists(gt)) {
        entry.mask = gt;
      } else if (require_masks) {
        throw IoError("dataset: missing ground-truth mask: " + gt.string());
      }
      group.entries.push_back(std::move(entry));
    }
    if (!group.entries.empty()) groups.push_back(std::move(group));
  }
  check(!groups.empty(), "dataset: no groups found under " + root.string(), IoError{""});
  return groups;
}

// Loads one group's pixels, resizing to `side` and binarizing masks at 0.5.
inline ImageGroup load_group(const DiskGroup& g, int side, bool want_masks = true) {
  ImageGroup out;
  out.id = g.id;
  for (const auto& entry : g.entries) {
    Tensor img = read_ppm(entry.image.string());
    if (img.extent(1) != side || img.extent(2) != side) {
      img = bilinear_resize(img, side, side);
    }
    out.images.push_back(img);
    if (want_masks) {
      check(!entry.mask.empty(), "dataset: mask required but missing for " + entry.id,
            IoError{""});
      Tensor m = read_pgm(entry.mask.string());
      if (m.extent(1) != side || m.extent(2) != side) {
        m = bilinear_resize(m, side, side);
      }
      float* p = m.data();
      for (std::int64_t i = 0; i < m.size(); ++i) p[i] = p[i] >= 0.5f ? 1.0f : 0.0f;
      out.masks.push_back(m);
    }
  }
  return out;
}

inline void write_group(const std::filesystem::path& root, const ImageGroup& group) {
  namespace fs = std::filesystem;
  const fs::path dir = root / group.id;
  fs::create_directories(dir);
  for (std::size_t i = 0; i < group.images.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "img_%03d", static_cast<int>(i));
    write_ppm((dir / (std::string(buf) + ".ppm")).string(), group.images[i]);
    if (i < group.masks.size()) {
      write_pgm((dir / (std::string(buf) + "_gt.pgm")).string(), group.masks[i]);
    }
  }
}

}  // namespace glnet
