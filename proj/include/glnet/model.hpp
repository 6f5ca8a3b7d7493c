#pragma once

// Whole-model orchestration.
//
// forward_group wiring (per image k of the N-image group):
//   F_ia^n = backbone(I^n) for all n           (shared weights)
//   G      = gcm(stack(F_ia))                  unless disable_gcm
//   P^k    = lcm(F_ia, k)                      unless disable_lcm
//   F_ie^k = gla(G, P^k)                       both branches enabled
//          = gla.attention_only(P^k or G)      one branch disabled
//   F_co^k = aewf(F_ia^k, F_ie^k)
//   M^k    = decoder(F_co^k)
// With both branches disabled the model degenerates to the single-image
// path: AEWF is fed F_ia twice and GLA is skipped entirely.

#include <string>
#include <vector>

#include "glnet/aewf.hpp"
#include "glnet/attention.hpp"
#include "glnet/backbone.hpp"
#include "glnet/gcm.hpp"
#include "glnet/gla.hpp"
#include "glnet/lcm.hpp"
#include "glnet/nn.hpp"
#include "glnet/ops.hpp"
#include "glnet/rng.hpp"
#include "glnet/tensor.hpp"

namespace glnet {

struct ModelConfig {
  int group_size = 5;   // N
  int input_side = 160; // S
  int channels = 32;    // C
  int stride = 8;       // 2^L backbone downsampling
  bool disable_gcm = false;
  bool disable_lcm = false;
  bool gcm_use_2d = false;
  int ca_ratio = 4;
  int sa_kernel = 7;
  bool pct_shared_projection = false;

  void validate() const {
    check(group_size >= 2, "config: group_size must be >= 2, got " + std::to_string(group_size));
    check(input_side >= stride && input_side % stride == 0,
          "config: input_side " + std::to_string(input_side) + " must be divisible by stride " +
              std::to_string(stride));
    backbone_levels(stride);  // power-of-two check
    check(channels >= 4, "config: channels must be >= 4, got " + std::to_string(channels));
    check(channels >= ca_ratio, "config: channels must be >= ca_ratio");
    check(sa_kernel >= 1 && sa_kernel % 2 == 1,
          "config: sa_kernel must be odd, got " + std::to_string(sa_kernel));
    check(input_side / stride >= sa_kernel / 2 + 1,
          "config: feature side too small for sa_kernel");
  }

  int feature_side() const { return input_side / stride; }
  int levels() const { return backbone_levels(stride); }

  bool operator==(const ModelConfig&) const = default;
};

template <typename S>
struct GLNetT {
  ModelConfig config;
  Backbone<S> backbone;
  Gcm<S> gcm;
  Lcm<S> lcm;
  Gla<S> gla;
  Aewf<S> aewf;
  Decoder<S> decoder;

  // Non-copyable/movable: the parameter registry holds pointers into the
  // module members.
  GLNetT(const GLNetT&) = delete;
  GLNetT& operator=(const GLNetT&) = delete;

  explicit GLNetT(const ModelConfig& cfg) : config(cfg) {
    cfg.validate();
    backbone = Backbone<S>("backbone", cfg.channels, cfg.stride, cfg.input_side);
    if (!cfg.disable_gcm) {
      gcm = Gcm<S>("gcm", cfg.channels, cfg.group_size, cfg.ca_ratio, cfg.sa_kernel,
                   cfg.gcm_use_2d);
    }
    if (!cfg.disable_lcm) {
      lcm = Lcm<S>("lcm", cfg.channels, cfg.group_size, cfg.ca_ratio, cfg.sa_kernel,
                   cfg.pct_shared_projection);
    }
    if (!cfg.disable_gcm || !cfg.disable_lcm) {
      gla = Gla<S>("gla", cfg.channels, cfg.ca_ratio, cfg.sa_kernel);
    }
    aewf = Aewf<S>("aewf", cfg.channels, cfg.ca_ratio);
    decoder = Decoder<S>("decoder", cfg.channels, cfg.levels());
    rebuild_registry();
  }

  // Fixed parameter order: backbone, gcm, lcm, gla, aewf, decoder. Defines
  // init order, optimizer state order, and checkpoint layout.
  ParamRefs<S> params() { return params_; }

  void init_parameters(std::uint64_t seed) {
    Rng rng(seed);
    glorot_init(params_, rng);
  }

  void zero_grad() {
    for (Parameter<S>* p : params_) p->tensor.zero_grad();
  }

  std::vector<TensorT<S>> intra_features(const std::vector<TensorT<S>>& images) const {
    std::vector<TensorT<S>> feats;
    feats.reserve(images.size());
    for (const auto& img : images) feats.push_back(backbone.forward(img));
    return feats;
  }

  std::vector<TensorT<S>> forward_group(const std::vector<TensorT<S>>& images) const {
    check(static_cast<int>(images.size()) == config.group_size,
          "forward_group: expected " + std::to_string(config.group_size) + " images, got " +
              std::to_string(images.size()));
    const std::vector<TensorT<S>> f_ia = intra_features(images);
    const int n = config.group_size;
    std::vector<TensorT<S>> maps;
    maps.reserve(static_cast<std::size_t>(n));

    if (config.disable_gcm && config.disable_lcm) {
      for (int k = 0; k < n; ++k) {
        const auto& f = f_ia[static_cast<std::size_t>(k)];
        maps.push_back(decoder.forward(aewf.forward(f, f)));
      }
      return maps;
    }

    TensorT<S> g;
    if (!config.disable_gcm) g = gcm.forward(stack_depth(f_ia));
    for (int k = 0; k < n; ++k) {
      TensorT<S> f_ie;
      if (!config.disable_gcm && !config.disable_lcm) {
        f_ie = gla.forward(g, lcm.forward(f_ia, k));
      } else if (config.disable_lcm) {
        f_ie = gla.attention_only(g);
      } else {
        f_ie = gla.attention_only(lcm.forward(f_ia, k));
      }
      maps.push_back(decoder.forward(aewf.forward(f_ia[static_cast<std::size_t>(k)], f_ie)));
    }
    return maps;
  }

 private:
  ParamRefs<S> params_;

  void rebuild_registry() {
    params_.clear();
    backbone.collect(params_);
    if (!config.disable_gcm) gcm.collect(params_);
    if (!config.disable_lcm) lcm.collect(params_);
    if (!config.disable_gcm || !config.disable_lcm) gla.collect(params_);
    aewf.collect(params_);
    decoder.collect(params_);
  }
};

using GLNet = GLNetT<float>;

// Group loss: mean over the N images of the per-image pixel-mean clamped BCE.
template <typename S>
TensorT<S> bce_group_loss(const std::vector<TensorT<S>>& maps,
                          const std::vector<TensorT<S>>& gts) {
  check(!maps.empty() && maps.size() == gts.size(),
        "bce_group_loss: need equally many maps and ground truths");
  TensorT<S> total = bce_mean(maps[0], gts[0]);
  for (std::size_t i = 1; i < maps.size(); ++i) {
    total = add(total, bce_mean(maps[i], gts[i]));
  }
  return scale(total, 1.0 / static_cast<double>(maps.size()));
}

}  // namespace glnet
