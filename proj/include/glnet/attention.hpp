#pragma once

// Channel attention (squeeze-excite style) and spatial attention. Both are
// multiplicative gates: output = gate ⊙ input, with gates strictly inside
// (0,1) because they come out of a sigmoid.
//
// Channel attention: global average pool -> bottleneck MLP (C -> C/r -> C,
// ReLU between) -> sigmoid -> per-channel scaling.
// Spatial attention: channel-wise mean and max -> concat [2,H,W] -> kxk conv
// (pad (k-1)/2) -> sigmoid -> per-location scaling.

#include <string>

#include "glnet/nn.hpp"
#include "glnet/ops.hpp"
#include "glnet/tensor.hpp"

namespace glnet {

template <typename S>
struct ChannelAttention {
  LinearLayer<S> reduce, expand;
  int channels = 0;

  ChannelAttention() = default;
  ChannelAttention(const std::string& prefix, int c, int ratio)
      : reduce(prefix + ".reduce", c, bottleneck_width(c, ratio)),
        expand(prefix + ".expand", bottleneck_width(c, ratio), c),
        channels(c) {
    check(ratio >= 1, "channel_attention: ratio must be >= 1");
  }

  static int bottleneck_width(int c, int ratio) {
    check(c >= ratio, "channel_attention: channels (" + std::to_string(c) +
                          ") must be >= reduction ratio (" + std::to_string(ratio) + ")");
    return c / ratio;
  }

  // Returns the gate alone, [C].
  TensorT<S> gate(const TensorT<S>& x) const {
    check(x.rank() == 3 && x.extent(0) == channels,
          "channel_attention: expected [C,H,W] with C=" + std::to_string(channels) + ", got " +
              shape_str(x.shape()));
    return sigmoid(expand.forward(relu(reduce.forward(global_avg_pool(x)))));
  }

  TensorT<S> forward(const TensorT<S>& x) const {
    TensorT<S> g = gate(x);
    return mul(x, reshape(g, {channels, 1, 1}));
  }

  void collect(ParamRefs<S>& out) {
    reduce.collect(out);
    expand.collect(out);
  }
};

template <typename S>
struct SpatialAttention {
  Conv2dLayer<S> conv;
  int kernel = 7;

  SpatialAttention() = default;
  SpatialAttention(const std::string& prefix, int k)
      : conv(prefix + ".conv", 2, 1, k, 1, (k - 1) / 2), kernel(k) {
    check(k >= 1 && k % 2 == 1, "spatial_attention: kernel must be odd, got " + std::to_string(k));
  }

  // Returns the gate alone, [1,H,W].
  TensorT<S> gate(const TensorT<S>& x) const {
    check(x.rank() == 3, "spatial_attention: input must be [C,H,W], got " + shape_str(x.shape()));
    std::vector<TensorT<S>> mm{channel_mean(x), channel_max(x)};
    return sigmoid(conv.forward(concat_channels(mm)));
  }

  TensorT<S> forward(const TensorT<S>& x) const { return mul(x, gate(x)); }

  void collect(ParamRefs<S>& out) { conv.collect(out); }
};

// The CA->SA cascade used throughout the network.
template <typename S>
struct AttentionPair {
  ChannelAttention<S> ca;
  SpatialAttention<S> sa;

  AttentionPair() = default;
  AttentionPair(const std::string& prefix, int c, int ratio, int k)
      : ca(prefix + ".ca", c, ratio), sa(prefix + ".sa", k) {}

  TensorT<S> forward(const TensorT<S>& x) const { return sa.forward(ca.forward(x)); }

  void collect(ParamRefs<S>& out) {
    ca.collect(out);
    sa.collect(out);
  }
};

}  // namespace glnet
