#pragma once

// Checkpoint file format (all integers little-endian):
//
//   magic   "GLNC" (4 bytes)
//   u32     format version (currently 1)
//   u32     entry count
//   entries, each:
//     u16   name length
//     ...   name bytes (no terminator)
//     u8    rank
//     u32   extent per rank dimension
//     f32   payload, raw little-endian, product(extents) values
//   u32     CRC32 (IEEE 802.3 reflected) of the entries region
//
// The model configuration and training-iteration counter are stored as
// scalar pseudo-entries named "__config.<field>" and "__iterations" so the
// container stays a flat list of named tensors. Pseudo-entries precede the
// parameter entries, which appear in model registry order; that order is
// deterministic, making save -> load -> save byte-identical.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <vector>

#include "glnet/model.hpp"

namespace glnet {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr char kCheckpointMagic[4] = {'G', 'L', 'N', 'C'};

inline std::uint32_t crc32_ieee(const std::uint8_t* data, std::size_t n,
                                std::uint32_t seed = 0) {
  static const std::vector<std::uint32_t> table = [] {
    std::vector<std::uint32_t> t(256);
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? (0xEDB88320u ^ (c >> 1)) : (c >> 1);
      t[i] = c;
    }
    return t;
  }();
  std::uint32_t c = seed ^ 0xFFFFFFFFu;
  for (std::size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFFu] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xFF));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::vector<std::uint8_t>& b, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(b, bits);
}

struct ByteCursor {
  const std::uint8_t* p = nullptr;
  std::size_t n = 0;
  std::size_t off = 0;

  void need(std::size_t k) const {
    if (off + k > n) throw IoError("checkpoint: truncated file");
  }
  std::uint8_t u8() {
    need(1);
    return p[off++];
  }
  std::uint16_t u16() {
    need(2);
    std::uint16_t v = static_cast<std::uint16_t>(p[off] | (p[off + 1] << 8));
    off += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[off + i]) << (8 * i);
    off += 4;
    return v;
  }
  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  std::string bytes(std::size_t k) {
    need(k);
    std::string s(reinterpret_cast<const char*>(p + off), k);
    off += k;
    return s;
  }
};

inline void append_entry(std::vector<std::uint8_t>& buf, const std::string& name,
                         const Shape& shape, const float* data) {
  check(name.size() < 65536, "checkpoint: entry name too long: " + name, IoError{""});
  check(shape.size() >= 1 && shape.size() <= 255, "checkpoint: bad entry rank", IoError{""});
  put_u16(buf, static_cast<std::uint16_t>(name.size()));
  buf.insert(buf.end(), name.begin(), name.end());
  buf.push_back(static_cast<std::uint8_t>(shape.size()));
  std::int64_t numel = 1;
  for (int e : shape) {
    put_u32(buf, static_cast<std::uint32_t>(e));
    numel *= e;
  }
  for (std::int64_t i = 0; i < numel; ++i) put_f32(buf, data[i]);
}

inline void append_scalar_entry(std::vector<std::uint8_t>& buf, const std::string& name,
                                float value) {
  append_entry(buf, name, Shape{1}, &value);
}

struct RawEntry {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

}  // namespace detail

inline void save_checkpoint(GLNet& model, const std::string& path,
                            std::int64_t iterations = 0) {
  std::vector<std::uint8_t> entries;
  const ModelConfig& c = model.config;
  std::uint32_t count = 0;
  auto scalar = [&](const std::string& name, float v) {
    detail::append_scalar_entry(entries, name, v);
    ++count;
  };
  scalar("__config.group_size", static_cast<float>(c.group_size));
  scalar("__config.input_side", static_cast<float>(c.input_side));
  scalar("__config.channels", static_cast<float>(c.channels));
  scalar("__config.stride", static_cast<float>(c.stride));
  scalar("__config.disable_gcm", c.disable_gcm ? 1.0f : 0.0f);
  scalar("__config.disable_lcm", c.disable_lcm ? 1.0f : 0.0f);
  scalar("__config.gcm_use_2d", c.gcm_use_2d ? 1.0f : 0.0f);
  scalar("__config.ca_ratio", static_cast<float>(c.ca_ratio));
  scalar("__config.sa_kernel", static_cast<float>(c.sa_kernel));
  scalar("__config.pct_shared_projection", c.pct_shared_projection ? 1.0f : 0.0f);
  scalar("__iterations", static_cast<float>(iterations));
  for (const Parameter<float>* p : model.params()) {
    detail::append_entry(entries, p->name, p->tensor.shape(), p->tensor.data());
    ++count;
  }
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "checkpoint: cannot open for writing: " + path, IoError{""});
  out.write(kCheckpointMagic, 4);
  std::vector<std::uint8_t> head;
  detail::put_u32(head, kCheckpointVersion);
  detail::put_u32(head, count);
  out.write(reinterpret_cast<const char*>(head.data()), static_cast<std::streamsize>(head.size()));
  out.write(reinterpret_cast<const char*>(entries.data()),
            static_cast<std::streamsize>(entries.size()));
  std::vector<std::uint8_t> tail;
  detail::put_u32(tail, crc32_ieee(entries.data(), entries.size()));
  out.write(reinterpret_cast<const char*>(tail.data()), static_cast<std::streamsize>(tail.size()));
  check(out.good(), "checkpoint: write failed: " + path, IoError{""});
}

struct LoadedCheckpoint {
  std::unique_ptr<GLNet> model;
  std::int64_t iterations = 0;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  check(in.good(), "checkpoint: cannot open: " + path, IoError{""});
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  check(bytes.size() >= 16, "checkpoint: truncated file", IoError{""});
  if (std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw IoError("checkpoint: bad magic (not a checkpoint file): " + path);
  }
  detail::ByteCursor cur{bytes.data() + 4, bytes.size() - 4, 0};
  const std::uint32_t version = cur.u32();
  if (version != kCheckpointVersion) {
    throw IoError("checkpoint: unsupported format version " + std::to_string(version));
  }
  const std::uint32_t count = cur.u32();
  const std::size_t entries_begin = cur.off;
  std::vector<detail::RawEntry> entries;
  entries.reserve(count);
  for (std::uint32_t e = 0; e < count; ++e) {
    detail::RawEntry entry;
    const std::uint16_t name_len = cur.u16();
    entry.name = cur.bytes(name_len);
    const std::uint8_t rank = cur.u8();
    check(rank >= 1 && rank <= 5, "checkpoint: bad entry rank for " + entry.name, IoError{""});
    std::int64_t numel = 1;
    for (int r = 0; r < rank; ++r) {
      const std::uint32_t ext = cur.u32();
      check(ext >= 1 && ext <= (1u << 24), "checkpoint: bad extent for " + entry.name,
            IoError{""});
      entry.shape.push_back(static_cast<int>(ext));
      numel *= ext;
    }
    entry.data.resize(static_cast<std::size_t>(numel));
    for (std::int64_t i = 0; i < numel; ++i) entry.data[static_cast<std::size_t>(i)] = cur.f32();
    entries.push_back(std::move(entry));
  }
  const std::size_t entries_end = cur.off;
  const std::uint32_t stored_crc = cur.u32();
  check(cur.off == cur.n, "checkpoint: trailing bytes after CRC", IoError{""});
  const std::uint32_t computed =
      crc32_ieee(bytes.data() + 4 + entries_begin, entries_end - entries_begin);
  if (computed != stored_crc) throw IoError("checkpoint: CRC mismatch (corrupt file)");

  std::map<std::string, const detail::RawEntry*> by_name;
  for (const auto& e : entries) {
    check(by_name.emplace(e.name, &e).second, "checkpoint: duplicate entry: " + e.name,
          IoError{""});
  }
  std::vector<std::string> consumed;
  auto scalar = [&](const std::string& name) -> float {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IoError("checkpoint: missing entry: " + name);
    check(it->second->data.size() == 1, "checkpoint: entry not scalar: " + name, IoError{""});
    consumed.push_back(name);
    return it->second->data[0];
  };
  ModelConfig cfg;
  cfg.group_size = static_cast<int>(scalar("__config.group_size"));
  cfg.input_side = static_cast<int>(scalar("__config.input_side"));
  cfg.channels = static_cast<int>(scalar("__config.channels"));
  cfg.stride = static_cast<int>(scalar("__config.stride"));
  cfg.disable_gcm = scalar("__config.disable_gcm") != 0.0f;
  cfg.disable_lcm = scalar("__config.disable_lcm") != 0.0f;
  cfg.gcm_use_2d = scalar("__config.gcm_use_2d") != 0.0f;
  cfg.ca_ratio = static_cast<int>(scalar("__config.ca_ratio"));
  cfg.sa_kernel = static_cast<int>(scalar("__config.sa_kernel"));
  cfg.pct_shared_projection = scalar("__config.pct_shared_projection") != 0.0f;
  cfg.validate();

  LoadedCheckpoint result;
  result.iterations = static_cast<std::int64_t>(scalar("__iterations"));
  result.model = std::make_unique<GLNet>(cfg);
  std::size_t param_count = 0;
  for (Parameter<float>* p : result.model->params()) {
    auto it = by_name.find(p->name);
    if (it == by_name.end()) throw IoError("checkpoint: missing parameter: " + p->name);
    const detail::RawEntry& e = *it->second;
    check(e.shape == p->tensor.shape(),
          "checkpoint: shape mismatch for " + p->name + ": file " + shape_str(e.shape) +
              " vs model " + shape_str(p->tensor.shape()),
          IoError{""});
    std::memcpy(p->tensor.data(), e.data.data(), e.data.size() * sizeof(float));
    consumed.push_back(p->name);
    ++param_count;
  }
  if (consumed.size() != entries.size()) {
    std::unordered_set<std::string> known(consumed.begin(), consumed.end());
    for (const auto& e : entries) {
      if (!known.count(e.name)) throw IoError("checkpoint: unexpected entry: " + e.name);
    }
  }
  (void)param_count;
  return result;
}

}  // namespace glnet
