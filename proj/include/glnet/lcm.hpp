#pragma once

// Local correspondence modeling.
//
// PCT (pairwise correlation transformation) between image k and reference j:
//   A^{kj}[p,q] = <proj_q(F_k) at p, proj_r(F_j) at q>      (HW x HW affinity)
//   Abar = rowmax(A)                                        (HW)
//   Atilde = softmax(Abar) reshaped to [1,H,W]              (sums to 1)
//   W^{kj} = SA(CA(Atilde ⊙ F_k ⊕ F_k))                     (residual attention)
// The two 1x1 projections have separate parameters by default; a flag shares
// them (the source formulation is ambiguous). No ReLU after the projections.
//
// Fusion: the N-1 pairwise results are stacked along depth (ascending
// reference index) and collapsed by N-2 ReLU-activated depth-2 3D convs;
// a single pair passes through unchanged. PCT parameters are shared across
// all pairs and all k.

#include <string>
#include <vector>

#include "glnet/attention.hpp"
#include "glnet/nn.hpp"
#include "glnet/ops.hpp"
#include "glnet/tensor.hpp"

namespace glnet {

template <typename S>
struct Pct {
  Conv2dLayer<S> proj_q;  // projection applied to F_k
  Conv2dLayer<S> proj_r;  // projection applied to F_j (unused when shared)
  AttentionPair<S> attn;
  int channels = 0;
  bool shared_projection = false;

  Pct() = default;
  Pct(const std::string& prefix, int c, int ca_ratio, int sa_kernel, bool shared)
      : proj_q(prefix + ".proj_q", c, c, 1, 1, 0),
        attn(prefix + ".attn", c, ca_ratio, sa_kernel),
        channels(c),
        shared_projection(shared) {
    if (!shared) proj_r = Conv2dLayer<S>(prefix + ".proj_r", c, c, 1, 1, 0);
  }

  // [HW, HW] affinity between every location pair (rows: image k, cols: j).
  TensorT<S> affinity(const TensorT<S>& fk, const TensorT<S>& fj) const {
    validate_pair(fk, fj);
    const int h = fk.extent(1), w = fk.extent(2);
    const Conv2dLayer<S>& pr = shared_projection ? proj_q : proj_r;
    TensorT<S> qk = reshape(proj_q.forward(fk), {channels, h * w});
    TensorT<S> rj = reshape(pr.forward(fj), {channels, h * w});
    return matmul(transpose2(qk), rj);
  }

  // Location-correlation weight map [1,H,W] (softmax over all HW locations).
  TensorT<S> attention_map(const TensorT<S>& fk, const TensorT<S>& fj) const {
    const int h = fk.extent(1), w = fk.extent(2);
    return reshape(softmax_vec(rowmax(affinity(fk, fj))), {1, h, w});
  }

  // Pairwise correlation features W^{kj} = SA(CA(Atilde ⊙ F_k ⊕ F_k)).
  TensorT<S> forward(const TensorT<S>& fk, const TensorT<S>& fj) const {
    TensorT<S> atilde = attention_map(fk, fj);
    return attn.forward(add(mul(fk, atilde), fk));
  }

  void collect(ParamRefs<S>& out) {
    proj_q.collect(out);
    if (!shared_projection) proj_r.collect(out);
    attn.collect(out);
  }

 private:
  void validate_pair(const TensorT<S>& fk, const TensorT<S>& fj) const {
    check(fk.rank() == 3 && fj.rank() == 3 && fk.shape() == fj.shape(),
          "pct: feature pair must share a rank-3 shape, got " + shape_str(fk.shape()) + " and " +
              shape_str(fj.shape()));
    check(fk.extent(0) == channels, "pct: expected C=" + std::to_string(channels) + ", got " +
                                        shape_str(fk.shape()));
  }
};

template <typename S>
struct LcmFuse {
  std::vector<Conv3dLayer<S>> layers;
  int channels = 0;
  int group_size = 0;  // N; fuses N-1 inputs

  LcmFuse() = default;
  LcmFuse(const std::string& prefix, int c, int n) : channels(c), group_size(n) {
    check(n >= 2, "lcm_fuse: group size must be >= 2, got " + std::to_string(n));
    int depth = n - 1;
    for (int i = 0; depth > 1; ++i) {
      layers.emplace_back(prefix + ".conv" + std::to_string(i), c, c, 2, 3, 3, 1);
      depth -= 1;
    }
    check(depth == 1, "lcm_fuse: fusion schedule failed to collapse depth to 1");
  }

  TensorT<S> forward(const std::vector<TensorT<S>>& correlations) const {
    check(!correlations.empty(), "lcm_fuse: empty correlation list");
    check(static_cast<int>(correlations.size()) == group_size - 1,
          "lcm_fuse: expected " + std::to_string(group_size - 1) + " inputs, got " +
              std::to_string(correlations.size()));
    if (correlations.size() == 1) return correlations[0];  // identity for N=2
    TensorT<S> x = stack_depth(correlations);
    for (const auto& layer : layers) x = relu(layer.forward(x));
    return reshape(x, {channels, x.extent(2), x.extent(3)});
  }

  void collect(ParamRefs<S>& out) {
    for (auto& l : layers) l.collect(out);
  }
};

template <typename S>
struct Lcm {
  Pct<S> pct;
  LcmFuse<S> fuse;

  Lcm() = default;
  Lcm(const std::string& prefix, int c, int n, int ca_ratio, int sa_kernel, bool shared_proj)
      : pct(prefix + ".pct", c, ca_ratio, sa_kernel, shared_proj), fuse(prefix + ".fuse", c, n) {}

  // P^k from the group's intra features (pairs j != k, ascending j).
  TensorT<S> forward(const std::vector<TensorT<S>>& features, int k) const {
    const int n = static_cast<int>(features.size());
    check(n >= 2, "lcm: group must have >= 2 images");
    check(k >= 0 && k < n, "lcm: image index " + std::to_string(k) + " out of range for group of " +
                               std::to_string(n));
    std::vector<TensorT<S>> correlations;
    correlations.reserve(static_cast<std::size_t>(n - 1));
    for (int j = 0; j < n; ++j) {
      if (j == k) continue;
      correlations.push_back(pct.forward(features[static_cast<std::size_t>(k)],
                                         features[static_cast<std::size_t>(j)]));
    }
    return fuse.forward(correlations);
  }

  void collect(ParamRefs<S>& out) {
    pct.collect(out);
    fuse.collect(out);
  }
};

}  // namespace glnet
