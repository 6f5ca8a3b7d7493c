#pragma once

// Global correspondence modeling: the group's intra features are stacked
// along a depth axis [C,N,H,W] and collapsed to depth 1 by a schedule of
// ReLU-activated 3D convolutions (depth kernels (2,3,2) for N=5, otherwise
// N-1 depth-2 kernels), then refined by channel+spatial attention:
// G = SA(CA(g)). Channel count stays C throughout; spatial pad 1 preserves
// H,W. An optional 2D variant (for the "3D conv replaced by 2D conv"
// ablation) runs three 3x3 2D convs on the channel-flattened stack instead.

#include <string>
#include <vector>

#include "glnet/attention.hpp"
#include "glnet/nn.hpp"
#include "glnet/ops.hpp"
#include "glnet/tensor.hpp"

namespace glnet {

inline std::vector<int> gcm_depth_schedule(int n) {
  check(n >= 2, "gcm: group size must be >= 2, got " + std::to_string(n));
  if (n == 5) return {2, 3, 2};
  return std::vector<int>(static_cast<std::size_t>(n - 1), 2);
}

template <typename S>
struct Gcm {
  std::vector<Conv3dLayer<S>> layers3d;
  std::vector<Conv2dLayer<S>> layers2d;
  AttentionPair<S> attn;
  int channels = 0;
  int group_size = 0;
  bool use_2d = false;

  Gcm() = default;
  Gcm(const std::string& prefix, int c, int n, int ca_ratio, int sa_kernel, bool use_2d_)
      : attn(prefix + ".attn", c, ca_ratio, sa_kernel),
        channels(c),
        group_size(n),
        use_2d(use_2d_) {
    if (use_2d) {
      layers2d.emplace_back(prefix + ".conv0", c * n, c, 3, 1, 1);
      layers2d.emplace_back(prefix + ".conv1", c, c, 3, 1, 1);
      layers2d.emplace_back(prefix + ".conv2", c, c, 3, 1, 1);
      return;
    }
    const std::vector<int> schedule = gcm_depth_schedule(n);
    int depth = n;
    for (std::size_t i = 0; i < schedule.size(); ++i) {
      const int kd = schedule[i];
      layers3d.emplace_back(prefix + ".conv" + std::to_string(i), c, c, kd, 3, 3, 1);
      depth = depth - kd + 1;
    }
    check(depth == 1, "gcm: depth schedule for N=" + std::to_string(n) +
                          " collapses to " + std::to_string(depth) + ", expected 1");
  }

  // Pre-attention feature g from the stacked group [C,N,H,W].
  TensorT<S> pre_attention(const TensorT<S>& stack) const {
    check(stack.rank() == 4, "gcm: input must be [C,N,H,W], got " + shape_str(stack.shape()));
    check(stack.extent(0) == channels && stack.extent(1) == group_size,
          "gcm: expected [C=" + std::to_string(channels) + ",N=" + std::to_string(group_size) +
              ",H,W], got " + shape_str(stack.shape()));
    if (use_2d) {
      const int h = stack.extent(2), w = stack.extent(3);
      TensorT<S> x = reshape(stack, {channels * group_size, h, w});
      for (const auto& layer : layers2d) x = relu(layer.forward(x));
      return x;
    }
    TensorT<S> x = stack;
    for (const auto& layer : layers3d) x = relu(layer.forward(x));
    // depth collapsed to exactly 1 by the schedule
    return reshape(x, {channels, x.extent(2), x.extent(3)});
  }

  TensorT<S> forward(const TensorT<S>& stack) const { return attn.forward(pre_attention(stack)); }

  void collect(ParamRefs<S>& out) {
    for (auto& l : layers3d) l.collect(out);
    for (auto& l : layers2d) l.collect(out);
    attn.collect(out);
  }
};

}  // namespace glnet
