#pragma once

// Adaptive intra-and-inter weighting fusion and the upsampling decoder.
//
// AEWF: F_cat = conv1x1(concat(F_ie, F_ia)) reducing 2C -> C;
//       alpha = sigmoid(bottleneck(CA(F_cat))), bottleneck = 1x1 convs
//       C -> C/4 -> C with ReLU between; alpha in (0,1) elementwise;
//       F_co = alpha ⊙ F_ie + (1-alpha) ⊙ F_ia, computed as
//       F_ia + alpha*(F_ie - F_ia) so F_ia == F_ie is an exact fixed point
//       and the result stays inside [min, max] of the inputs up to 32-bit
//       rounding.
//
// Decoder: L transposed-conv blocks (4x4, stride 2, pad 1, ReLU), halving
// channels down to a floor of 8, then a 1x1 conv to one channel and sigmoid.
// The sigmoid output is clamped to [1e-7, 1-1e-7] so maps are strictly
// inside (0,1) even where float rounding would saturate.

#include <string>
#include <vector>

#include "glnet/attention.hpp"
#include "glnet/nn.hpp"
#include "glnet/ops.hpp"
#include "glnet/tensor.hpp"

namespace glnet {

template <typename S>
struct Aewf {
  Conv2dLayer<S> reduce;   // 2C -> C, 1x1
  ChannelAttention<S> ca;
  Conv2dLayer<S> bneck1;   // C -> C/4, 1x1
  Conv2dLayer<S> bneck2;   // C/4 -> C, 1x1
  int channels = 0;

  Aewf() = default;
  Aewf(const std::string& prefix, int c, int ca_ratio)
      : reduce(prefix + ".reduce", 2 * c, c, 1, 1, 0),
        ca(prefix + ".ca", c, ca_ratio),
        bneck1(prefix + ".bneck1", c, bottleneck_width(c), 1, 1, 0),
        bneck2(prefix + ".bneck2", bottleneck_width(c), c, 1, 1, 0),
        channels(c) {}

  static int bottleneck_width(int c) {
    check(c >= 4, "aewf: channels must be >= 4 for the C/4 bottleneck, got " + std::to_string(c));
    return c / 4;
  }

  // The weighting map alpha^k, [C,H,W], strictly in (0,1).
  TensorT<S> alpha(const TensorT<S>& f_ia, const TensorT<S>& f_ie) const {
    validate_pair(f_ia, f_ie);
    std::vector<TensorT<S>> cat{f_ie, f_ia};  // order pinned: inter first
    TensorT<S> f_cat = reduce.forward(concat_channels(cat));
    return sigmoid(bneck2.forward(relu(bneck1.forward(ca.forward(f_cat)))));
  }

  TensorT<S> forward(const TensorT<S>& f_ia, const TensorT<S>& f_ie) const {
    TensorT<S> a = alpha(f_ia, f_ie);
    return lerp(f_ia, f_ie, a);
  }

  // Test hook: the fusion arithmetic with an externally forced alpha.
  static TensorT<S> fuse_with_alpha(const TensorT<S>& f_ia, const TensorT<S>& f_ie,
                                    const TensorT<S>& a) {
    return lerp(f_ia, f_ie, a);
  }

  void collect(ParamRefs<S>& out) {
    reduce.collect(out);
    ca.collect(out);
    bneck1.collect(out);
    bneck2.collect(out);
  }

 private:
  void validate_pair(const TensorT<S>& f_ia, const TensorT<S>& f_ie) const {
    check(f_ia.rank() == 3 && f_ia.shape() == f_ie.shape(),
          "aewf: F_ia and F_ie must share a rank-3 shape, got " + shape_str(f_ia.shape()) +
              " and " + shape_str(f_ie.shape()));
    check(f_ia.extent(0) == channels, "aewf: expected C=" + std::to_string(channels) +
                                          ", got " + shape_str(f_ia.shape()));
  }
};

inline constexpr double kMapClamp = 1e-7;

inline std::vector<int> decoder_widths(int c, int levels) {
  std::vector<int> widths;
  int ch = c;
  for (int l = 0; l < levels; ++l) {
    ch = std::max(8, ch / 2);
    widths.push_back(ch);
  }
  return widths;
}

template <typename S>
struct Decoder {
  std::vector<Deconv2dLayer<S>> ups;
  Conv2dLayer<S> head;  // 1x1 to a single channel
  int channels = 0;
  int levels = 0;

  Decoder() = default;
  Decoder(const std::string& prefix, int c, int levels_) : channels(c), levels(levels_) {
    check(levels_ >= 1, "decoder: needs at least one upsampling level");
    const std::vector<int> widths = decoder_widths(c, levels_);
    int in = c;
    for (int l = 0; l < levels_; ++l) {
      ups.emplace_back(prefix + ".up" + std::to_string(l), in, widths[static_cast<std::size_t>(l)]);
      in = widths[static_cast<std::size_t>(l)];
    }
    head = Conv2dLayer<S>(prefix + ".head", in, 1, 1, 1, 0);
  }

  // [C,H,W] -> [1, H*2^L, W*2^L], values strictly in (0,1).
  TensorT<S> forward(const TensorT<S>& f_co) const {
    check(f_co.rank() == 3 && f_co.extent(0) == channels,
          "decoder: expected [C=" + std::to_string(channels) + ",H,W], got " +
              shape_str(f_co.shape()));
    TensorT<S> x = f_co;
    for (const auto& up : ups) x = relu(up.forward(x));
    return clamp(sigmoid(head.forward(x)), kMapClamp, 1.0 - kMapClamp);
  }

  void collect(ParamRefs<S>& out) {
    for (auto& u : ups) u.collect(out);
    head.collect(out);
  }
};

}  // namespace glnet
