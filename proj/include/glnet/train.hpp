#pragma once

// Training loop: per step, sample a group (uniformly, from the run RNG),
// optionally augment each image/mask pair with the same random horizontal
// flip and 90-degree rotation, run the group forward, take the group BCE
// loss, backprop, and apply one Adam update with the cosine-annealed
// learning rate. One log row (step, loss, lr) is recorded per step.
//
// With batch > 1 the step loss is the mean over `batch` sampled groups and
// gradients accumulate across them before the single optimizer update.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <vector>

#include "glnet/model.hpp"
#include "glnet/optim.hpp"
#include "glnet/rng.hpp"
#include "glnet/synth.hpp"

namespace glnet {

struct TrainConfig {
  int iterations = 500;
  int batch = 1;  // groups per optimizer step
  float lr_init = 1e-3f;
  float lr_min = 1e-5f;
  float weight_decay = 1e-4f;
  std::uint64_t seed = 0;
  bool augment = true;
  int log_every = 1;  // progress print cadence; the CSV log always has one row per step

  void validate() const {
    check(iterations >= 1, "train: iterations must be >= 1", ConfigError{""});
    check(batch >= 1, "train: batch must be >= 1", ConfigError{""});
    check(lr_init > 0.0f && lr_min > 0.0f, "train: learning rates must be positive",
          ConfigError{""});
    check(lr_min <= lr_init, "train: lr_min must be <= lr_init", ConfigError{""});
    check(weight_decay >= 0.0f, "train: weight_decay must be >= 0", ConfigError{""});
    check(log_every >= 1, "train: log_every must be >= 1", ConfigError{""});
  }
};

struct TrainLogRow {
  int step = 0;
  double loss = 0.0;
  double lr = 0.0;
};

// ---------------------------------------------------------------------------
// Geometric augmentation on raw [C,H,W] tensors (input-side, not recorded).
// ---------------------------------------------------------------------------
template <typename S>
TensorT<S> flip_horizontal(const TensorT<S>& t) {
  check(t.rank() == 3, "flip_horizontal: expected rank-3 tensor, got " + shape_str(t.shape()));
  const int c = t.extent(0), h = t.extent(1), w = t.extent(2);
  TensorT<S> out = TensorT<S>::zeros(t.shape());
  const S* src = t.data();
  S* dst = out.data();
  for (int ci = 0; ci < c; ++ci) {
    for (int y = 0; y < h; ++y) {
      const S* row = src + (static_cast<std::int64_t>(ci) * h + y) * w;
      S* orow = dst + (static_cast<std::int64_t>(ci) * h + y) * w;
      for (int x = 0; x < w; ++x) orow[x] = row[w - 1 - x];
    }
  }
  return out;
}

// k counterclockwise quarter turns, k in [0,3].
template <typename S>
TensorT<S> rot90(const TensorT<S>& t, int k) {
  check(t.rank() == 3, "rot90: expected rank-3 tensor, got " + shape_str(t.shape()));
  check(k >= 0 && k <= 3, "rot90: k must be in [0,3]");
  const int c = t.extent(0), h = t.extent(1), w = t.extent(2);
  if (k == 0) return t.detach_copy();
  Shape oshape = (k == 2) ? Shape{c, h, w} : Shape{c, w, h};
  TensorT<S> out = TensorT<S>::zeros(oshape);
  const S* src = t.data();
  S* dst = out.data();
  const int oh = oshape[1], ow = oshape[2];
  for (int ci = 0; ci < c; ++ci) {
    const S* plane = src + static_cast<std::int64_t>(ci) * h * w;
    S* oplane = dst + static_cast<std::int64_t>(ci) * oh * ow;
    for (int y = 0; y < oh; ++y) {
      for (int x = 0; x < ow; ++x) {
        S v;
        if (k == 1) {
          v = plane[static_cast<std::int64_t>(x) * w + (w - 1 - y)];
        } else if (k == 2) {
          v = plane[static_cast<std::int64_t>(h - 1 - y) * w + (w - 1 - x)];
        } else {
          v = plane[static_cast<std::int64_t>(h - 1 - x) * w + y];
        }
        oplane[static_cast<std::int64_t>(y) * ow + x] = v;
      }
    }
  }
  return out;
}

// Applies an independently sampled (flip, rotation) to each image and the
// identical transform to its mask. Only square inputs keep their extents
// under rotation, which group forward requires anyway.
inline ImageGroup augment_group(const ImageGroup& g, Rng& rng) {
  ImageGroup out;
  out.id = g.id;
  check(g.masks.size() == g.images.size(), "augment: group is missing masks");
  for (std::size_t i = 0; i < g.images.size(); ++i) {
    const bool flip = rng.bernoulli(0.5);
    const int rot = static_cast<int>(rng.uniform_int(4));
    Tensor img = g.images[i];
    Tensor mask = g.masks[i];
    if (flip) {
      img = flip_horizontal(img);
      mask = flip_horizontal(mask);
    }
    if (rot != 0) {
      img = rot90(img, rot);
      mask = rot90(mask, rot);
    }
    out.images.push_back(img);
    out.masks.push_back(mask);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Train loop. Mutates `model` in place; the caller persists the checkpoint.
// ---------------------------------------------------------------------------
template <typename S>
std::vector<TrainLogRow> train(GLNetT<S>& model, const std::vector<ImageGroup>& data,
                               const TrainConfig& cfg, std::ostream* progress = nullptr) {
  cfg.validate();
  check(!data.empty(), "train: empty dataset", ConfigError{""});
  for (const ImageGroup& g : data) {
    check(static_cast<int>(g.images.size()) == model.config.group_size,
          "train: group '" + g.id + "' size does not match model group_size", ConfigError{""});
    check(g.masks.size() == g.images.size(),
          "train: group '" + g.id + "' is missing ground-truth masks", ConfigError{""});
  }
  Rng rng(cfg.seed);
  const ParamRefs<S> params = model.params();
  Adam<S> opt(cfg.weight_decay);
  std::vector<TrainLogRow> log;
  log.reserve(cfg.iterations);
  for (int step = 0; step < cfg.iterations; ++step) {
    const double lr = cosine_lr(step, cfg.iterations, cfg.lr_init, cfg.lr_min);
    model.zero_grad();
    TensorT<S> total_loss;
    for (int b = 0; b < cfg.batch; ++b) {
      const std::size_t gi = static_cast<std::size_t>(rng.uniform_int(data.size()));
      ImageGroup sample = cfg.augment ? augment_group(data[gi], rng) : data[gi];
      std::vector<TensorT<S>> maps = model.forward_group(sample.images);
      std::vector<TensorT<S>> gts;
      gts.reserve(sample.masks.size());
      for (const Tensor& m : sample.masks) gts.push_back(cast_tensor<S>(m));
      TensorT<S> loss = bce_group_loss(maps, gts);
      total_loss = (b == 0) ? loss : add(total_loss, loss);
    }
    if (cfg.batch > 1) total_loss = scale(total_loss, S(1) / S(cfg.batch));
    const double loss_value = static_cast<double>(total_loss.item());
    if (!std::isfinite(loss_value)) {
      throw NumericError("train: non-finite loss at step " + std::to_string(step));
    }
    backward(total_loss);
    opt.step(params, lr);
    log.push_back({step, loss_value, lr});
    if (progress && (step % cfg.log_every == 0 || step + 1 == cfg.iterations)) {
      (*progress) << "step " << step << " loss " << loss_value << " lr " << lr << "\n";
    }
  }
  return log;
}

inline void write_train_log_csv(const std::string& path, const std::vector<TrainLogRow>& log) {
  std::ofstream out(path, std::ios::binary);
  check(out.good(), "train: cannot open log for writing: " + path, IoError{""});
  out << "step,loss,lr\n";
  char buf[96];
  for (const TrainLogRow& row : log) {
    std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g\n", row.step, row.loss, row.lr);
    out << buf;
  }
  check(out.good(), "train: failed writing log: " + path, IoError{""});
}

}  // namespace glnet
