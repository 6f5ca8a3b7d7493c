#pragma once

// Binary PPM (P6) / PGM (P5) image I/O and bilinear rescaling.
//
// Float<->byte convention: written pixels are round(255*v) clamped to
// [0,255]; read pixels are v/255. Only maxval 255 is accepted (bit-exact
// 8-bit interchange). Header parsing accepts arbitrary whitespace and
// '#' comments, like the netpbm tools produce.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "glnet/tensor.hpp"

namespace glnet {

namespace detail {

inline int pnm_next_int(std::istream& in, const std::string& path) {
  // skip whitespace and comments
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      break;
    }
  }
  int value = 0;
  if (!(in >> value)) throw IoError("malformed header in " + path);
  return value;
}

inline std::vector<std::uint8_t> pnm_read_payload(std::istream& in, const std::string& path,
                                                  std::size_t bytes) {
  // exactly one whitespace byte separates header and payload
  in.get();
  std::vector<std::uint8_t> buf(bytes);
  in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) {
    throw IoError("truncated pixel payload in " + path);
  }
  return buf;
}

inline std::uint8_t to_byte(float v) {
  const float scaled = std::round(255.0f * v);
  if (scaled <= 0.0f) return 0;
  if (scaled >= 255.0f) return 255;
  return static_cast<std::uint8_t>(scaled);
}

}  // namespace detail

// [3,H,W] in [0,1] -> binary P6.
inline void write_ppm(const std::string& path, const Tensor& image) {
  check(image.rank() == 3 && image.extent(0) == 3,
        "write_ppm: image must be [3,H,W], got " + shape_str(image.shape()));
  const int h = image.extent(1), w = image.extent(2);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P6\n" << w << " " << h << "\n255\n";
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const float* p = image.data();
  std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        row[static_cast<std::size_t>(x) * 3 + static_cast<std::size_t>(c)] =
            detail::to_byte(p[c * plane + static_cast<std::int64_t>(y) * w + x]);
      }
    }
    out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw IoError("write failed: " + path);
}

inline Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '6') throw IoError("not a binary PPM (P6): " + path);
  const int w = detail::pnm_next_int(in, path);
  const int h = detail::pnm_next_int(in, path);
  const int maxval = detail::pnm_next_int(in, path);
  if (w <= 0 || h <= 0) throw IoError("bad extents in " + path);
  if (maxval != 255) throw IoError("unsupported maxval (expected 255) in " + path);
  const auto buf =
      detail::pnm_read_payload(in, path, static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3);
  Tensor image = Tensor::zeros({3, h, w});
  float* p = image.data();
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        p[c * plane + static_cast<std::int64_t>(y) * w + x] =
            static_cast<float>(buf[(static_cast<std::size_t>(y) * w + x) * 3 +
                                   static_cast<std::size_t>(c)]) /
            255.0f;
      }
    }
  }
  return image;
}

// [1,H,W] or [H,W] in [0,1] -> binary P5.
inline void write_pgm(const std::string& path, const Tensor& map) {
  check((map.rank() == 3 && map.extent(0) == 1) || map.rank() == 2,
        "write_pgm: map must be [1,H,W] or [H,W], got " + shape_str(map.shape()));
  const int h = map.rank() == 3 ? map.extent(1) : map.extent(0);
  const int w = map.rank() == 3 ? map.extent(2) : map.extent(1);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P5\n" << w << " " << h << "\n255\n";
  const float* p = map.data();
  std::vector<std::uint8_t> buf(static_cast<std::size_t>(h) * static_cast<std::size_t>(w));
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] = detail::to_byte(p[i]);
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path);
}

// -> [1,H,W] in [0,1]
inline Tensor read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  char m0 = 0, m1 = 0;
  in.get(m0);
  in.get(m1);
  if (m0 != 'P' || m1 != '5') throw IoError("not a binary PGM (P5): " + path);
  const int w = detail::pnm_next_int(in, path);
  const int h = detail::pnm_next_int(in, path);
  const int maxval = detail::pnm_next_int(in, path);
  if (w <= 0 || h <= 0) throw IoError("bad extents in " + path);
  if (maxval != 255) throw IoError("unsupported maxval (expected 255) in " + path);
  const auto buf = detail::pnm_read_payload(
      in, path, static_cast<std::size_t>(w) * static_cast<std::size_t>(h));
  Tensor map = Tensor::zeros({1, h, w});
  float* p = map.data();
  for (std::size_t i = 0; i < buf.size(); ++i) p[i] = static_cast<float>(buf[i]) / 255.0f;
  return map;
}

// Bilinear resize of [C,H,W] to [C,oh,ow], half-pixel-center convention.
inline Tensor bilinear_resize(const Tensor& x, int oh, int ow) {
  check(x.rank() == 3, "bilinear_resize: input must be rank-3, got " + shape_str(x.shape()));
  check(oh >= 1 && ow >= 1, "bilinear_resize: output extents must be positive");
  const int c = x.extent(0), h = x.extent(1), w = x.extent(2);
  if (oh == h && ow == w) return x.detach_copy();
  Tensor out = Tensor::zeros({c, oh, ow});
  const float* src = x.data();
  float* dst = out.data();
  const double sy = static_cast<double>(h) / oh;
  const double sx = static_cast<double>(w) / ow;
  const std::int64_t in_plane = static_cast<std::int64_t>(h) * w;
  const std::int64_t out_plane = static_cast<std::int64_t>(oh) * ow;
  for (int y = 0; y < oh; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    const int y0 = std::max(0, std::min(h - 1, static_cast<int>(std::floor(fy))));
    const int y1 = std::min(h - 1, y0 + 1);
    const double wy = std::max(0.0, std::min(1.0, fy - y0));
    for (int xo = 0; xo < ow; ++xo) {
      const double fx = (xo + 0.5) * sx - 0.5;
      const int x0 = std::max(0, std::min(w - 1, static_cast<int>(std::floor(fx))));
      const int x1 = std::min(w - 1, x0 + 1);
      const double wx = std::max(0.0, std::min(1.0, fx - x0));
      for (int ci = 0; ci < c; ++ci) {
        const float* sp = src + ci * in_plane;
        const double top = (1.0 - wx) * sp[static_cast<std::int64_t>(y0) * w + x0] +
                           wx * sp[static_cast<std::int64_t>(y0) * w + x1];
        const double bot = (1.0 - wx) * sp[static_cast<std::int64_t>(y1) * w + x0] +
                           wx * sp[static_cast<std::int64_t>(y1) * w + x1];
        dst[ci * out_plane + static_cast<std::int64_t>(y) * ow + xo] =
            static_cast<float>((1.0 - wy) * top + wy * bot);
      }
    }
  }
  return out;
}

}  // namespace glnet
