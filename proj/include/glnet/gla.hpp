#pragma once

// Global-and-local aggregation: the global feature G and the per-image local
// feature P^k are stacked along depth (order pinned: G first), merged by one
// 2x3x3 3D conv (spatial pad 1) with ReLU, then refined by CA and SA:
//   F_ie^k = SA(CA(relu(conv3d([G, P^k])))).
// When one branch is ablated away, the surviving branch passes through the
// CA/SA cascade only (attention_only).

#include <string>
#include <vector>

#include "glnet/attention.hpp"
#include "glnet/nn.hpp"
#include "glnet/ops.hpp"
#include "glnet/tensor.hpp"

namespace glnet {

template <typename S>
struct Gla {
  Conv3dLayer<S> merge;
  AttentionPair<S> attn;
  int channels = 0;

  Gla() = default;
  Gla(const std::string& prefix, int c, int ca_ratio, int sa_kernel)
      : merge(prefix + ".merge", c, c, 2, 3, 3, 1),
        attn(prefix + ".attn", c, ca_ratio, sa_kernel),
        channels(c) {}

  TensorT<S> forward(const TensorT<S>& g, const TensorT<S>& p) const {
    check(g.rank() == 3 && g.shape() == p.shape(),
          "gla: G and P must share a rank-3 shape, got " + shape_str(g.shape()) + " and " +
              shape_str(p.shape()));
    std::vector<TensorT<S>> pair{g, p};
    TensorT<S> merged = relu(merge.forward(stack_depth(pair)));
    return attn.forward(reshape(merged, {channels, g.extent(1), g.extent(2)}));
  }

  // Single-branch path used by the ablations.
  TensorT<S> attention_only(const TensorT<S>& x) const { return attn.forward(x); }

  void collect(ParamRefs<S>& out) {
    merge.collect(out);
    attn.collect(out);
  }
};

}  // namespace glnet
