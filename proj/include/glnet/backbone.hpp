#pragma once

// Small trainable Siamese backbone: L stride-2 blocks, each a 3x3 conv
// (pad 1) + ReLU followed by a 4x4 stride-2 pad-1 downsampling conv + ReLU.
// The 4x4/2/1 downsampler halves even extents exactly, which keeps conv2d's
// integral-output contract satisfiable at every level (a 3x3 stride-2 conv
// cannot produce an integral output extent on even inputs for any integer
// pad). Widths double per level up to the final channel count C, with a
// small floor so toy configs stay trainable. One image at a time; parameters
// are shared across all images of a group.

#include <algorithm>
#include <string>
#include <vector>

#include "glnet/nn.hpp"
#include "glnet/ops.hpp"
#include "glnet/tensor.hpp"

namespace glnet {

inline int backbone_levels(int stride) {
  check(stride >= 2, "backbone: stride must be >= 2, got " + std::to_string(stride));
  int levels = 0;
  int s = stride;
  while (s > 1) {
    check(s % 2 == 0, "backbone: stride must be a power of two, got " + std::to_string(stride));
    s /= 2;
    ++levels;
  }
  return levels;
}

inline std::vector<int> backbone_widths(int c, int levels) {
  const int floor_w = std::min(8, c);
  std::vector<int> widths;
  for (int l = 0; l < levels; ++l) {
    widths.push_back(std::max(floor_w, c >> (levels - 1 - l)));
  }
  return widths;
}

template <typename S>
struct Backbone {
  std::vector<Conv2dLayer<S>> convs;  // pairs: (3x3 pad 1, 4x4 stride 2 pad 1)
  int channels = 0;
  int stride = 0;
  int input_side = 0;

  Backbone() = default;
  Backbone(const std::string& prefix, int c, int stride_, int input_side_)
      : channels(c), stride(stride_), input_side(input_side_) {
    const int levels = backbone_levels(stride_);
    check(input_side_ % stride_ == 0, "backbone: input side " + std::to_string(input_side_) +
                                          " not divisible by stride " + std::to_string(stride_));
    const std::vector<int> widths = backbone_widths(c, levels);
    int in = 3;
    for (int l = 0; l < levels; ++l) {
      const int w = widths[static_cast<std::size_t>(l)];
      convs.emplace_back(prefix + ".b" + std::to_string(l) + ".conv", in, w, 3, 1, 1);
      convs.emplace_back(prefix + ".b" + std::to_string(l) + ".down", w, w, 4, 2, 1);
      in = w;
    }
  }

  // [3,S,S] -> [C, S/stride, S/stride]
  TensorT<S> forward(const TensorT<S>& image) const {
    check(image.rank() == 3 && image.extent(0) == 3,
          "backbone: input must be [3,S,S], got " + shape_str(image.shape()));
    check(image.extent(1) == input_side && image.extent(2) == input_side,
          "backbone: expected side " + std::to_string(input_side) + ", got " +
              shape_str(image.shape()));
    TensorT<S> x = image;
    for (const auto& conv : convs) x = relu(conv.forward(x));
    return x;
  }

  void collect(ParamRefs<S>& out) {
    for (auto& c : convs) c.collect(out);
  }
};

}  // namespace glnet
