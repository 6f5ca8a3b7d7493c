#pragma once

// Differentiable tensor ops: pointwise/broadcast arithmetic, activations,
// shape manipulation, reductions, softmax/rowmax, matmul, and the clamped
// binary cross-entropy. Convolutions live in conv.hpp.
//
// Conventions shared by all ops:
//  - shapes are validated eagerly (ShapeError with op name and shapes),
//  - forward outputs are checked finite (NumericError otherwise),
//  - pullbacks receive the output gradient buffer and accumulate with +=
//    into input grad buffers,
//  - reductions accumulate in double regardless of the scalar type.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "glnet/gemm.hpp"
#include "glnet/rng.hpp"
#include "glnet/tensor.hpp"

namespace glnet {

template <typename S>
TensorT<S> uniform_tensor(Rng& rng, Shape shape, double lo, double hi) {
  TensorT<S> t = TensorT<S>::zeros(std::move(shape));
  S* p = t.data();
  for (std::int64_t i = 0; i < t.size(); ++i) p[i] = static_cast<S>(rng.uniform(lo, hi));
  return t;
}

// ---------------------------------------------------------------------------
// Broadcasting machinery. Shapes broadcast numpy-style (right-aligned; an
// extent must match or be 1). Gradients of broadcast inputs are sum-reduced
// over the broadcast dimensions by accumulating through the same index map.
// ---------------------------------------------------------------------------
namespace detail {

inline Shape broadcast_shape(const char* op, const Shape& a, const Shape& b) {
  const int ra = static_cast<int>(a.size()), rb = static_cast<int>(b.size());
  const int r = std::max(ra, rb);
  Shape out(static_cast<std::size_t>(r));
  for (int i = 0; i < r; ++i) {
    const int ea = i < r - ra ? 1 : a[static_cast<std::size_t>(i - (r - ra))];
    const int eb = i < r - rb ? 1 : b[static_cast<std::size_t>(i - (r - rb))];
    check(ea == eb || ea == 1 || eb == 1,
          std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
              " do not broadcast");
    out[static_cast<std::size_t>(i)] = std::max(ea, eb);
  }
  return out;
}

// Strides of `in` viewed in the coordinate system of `out` (0 on broadcast
// axes), right-aligned.
inline std::array<std::int64_t, 5> broadcast_strides(const Shape& in, const Shape& out) {
  std::array<std::int64_t, 5> strides{};
  const int r = static_cast<int>(out.size());
  const int ri = static_cast<int>(in.size());
  std::int64_t s = 1;
  for (int i = ri - 1; i >= 0; --i) {
    const int axis = i + (r - ri);
    strides[static_cast<std::size_t>(axis)] = (in[static_cast<std::size_t>(i)] == 1) ? 0 : s;
    s *= in[static_cast<std::size_t>(i)];
  }
  return strides;
}

// Walks every flat index of `out` together with the mapped flat indices of a
// and b. fn(io, ia, ib).
template <typename Fn>
void broadcast_walk(const Shape& out, const std::array<std::int64_t, 5>& sa,
                    const std::array<std::int64_t, 5>& sb, Fn&& fn) {
  const int r = static_cast<int>(out.size());
  std::array<int, 5> idx{};
  const std::int64_t n = shape_numel(out);
  std::int64_t ia = 0, ib = 0;
  for (std::int64_t io = 0; io < n; ++io) {
    fn(io, ia, ib);
    for (int d = r - 1; d >= 0; --d) {
      const auto du = static_cast<std::size_t>(d);
      ++idx[du];
      ia += sa[du];
      ib += sb[du];
      if (idx[du] < out[du]) break;
      ia -= sa[du] * out[du];
      ib -= sb[du] * out[du];
      idx[du] = 0;
    }
  }
}

enum class BinKind { Add, Sub, Mul };

template <typename S>
TensorT<S> binary_broadcast(const char* name, BinKind kind, const TensorT<S>& a,
                            const TensorT<S>& b) {
  check(a.defined() && b.defined(), std::string(name) + ": undefined operand");
  TensorT<S> out;
  const bool same = a.shape() == b.shape();
  if (same) {
    out = TensorT<S>::zeros(a.shape());
    const S* pa = a.data();
    const S* pb = b.data();
    S* po = out.data();
    const std::int64_t n = out.size();
    switch (kind) {
      case BinKind::Add:
        for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pb[i];
        break;
      case BinKind::Sub:
        for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] - pb[i];
        break;
      case BinKind::Mul:
        for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] * pb[i];
        break;
    }
  } else {
    const Shape os = broadcast_shape(name, a.shape(), b.shape());
    out = TensorT<S>::zeros(os);
    const auto sa = broadcast_strides(a.shape(), os);
    const auto sb = broadcast_strides(b.shape(), os);
    const S* pa = a.data();
    const S* pb = b.data();
    S* po = out.data();
    switch (kind) {
      case BinKind::Add:
        broadcast_walk(os, sa, sb, [&](std::int64_t io, std::int64_t ia, std::int64_t ib) {
          po[io] = pa[ia] + pb[ib];
        });
        break;
      case BinKind::Sub:
        broadcast_walk(os, sa, sb, [&](std::int64_t io, std::int64_t ia, std::int64_t ib) {
          po[io] = pa[ia] - pb[ib];
        });
        break;
      case BinKind::Mul:
        broadcast_walk(os, sa, sb, [&](std::int64_t io, std::int64_t ia, std::int64_t ib) {
          po[io] = pa[ia] * pb[ib];
        });
        break;
    }
  }
  ensure_finite(out, name);
  const std::int64_t nout = out.size();
  record_op(out, name, {&a, &b},
            [kind, a, b, out_shape = out.shape_, same, nout](const S* g) {
              if (same) {
                if (a.requires_grad_) {
                  S* ga = a.grad_->data();
                  if (kind == BinKind::Mul) {
                    const S* pb = b.data();
                    for (std::int64_t i = 0; i < nout; ++i) ga[i] += g[i] * pb[i];
                  } else {
                    for (std::int64_t i = 0; i < nout; ++i) ga[i] += g[i];
                  }
                }
                if (b.requires_grad_) {
                  S* gb = b.grad_->data();
                  switch (kind) {
                    case BinKind::Add:
                      for (std::int64_t i = 0; i < nout; ++i) gb[i] += g[i];
                      break;
                    case BinKind::Sub:
                      for (std::int64_t i = 0; i < nout; ++i) gb[i] -= g[i];
                      break;
                    case BinKind::Mul: {
                      const S* pa = a.data();
                      for (std::int64_t i = 0; i < nout; ++i) gb[i] += g[i] * pa[i];
                      break;
                    }
                  }
                }
                return;
              }
              const auto sa = broadcast_strides(a.shape_, out_shape);
              const auto sb = broadcast_strides(b.shape_, out_shape);
              const S* pa = a.data();
              const S* pb = b.data();
              S* ga = a.requires_grad_ ? a.grad_->data() : nullptr;
              S* gb = b.requires_grad_ ? b.grad_->data() : nullptr;
              broadcast_walk(out_shape, sa, sb,
                             [&](std::int64_t io, std::int64_t ia, std::int64_t ib) {
                               const S gi = g[io];
                               switch (kind) {
                                 case BinKind::Add:
                                   if (ga) ga[ia] += gi;
                                   if (gb) gb[ib] += gi;
                                   break;
                                 case BinKind::Sub:
                                   if (ga) ga[ia] += gi;
                                   if (gb) gb[ib] -= gi;
                                   break;
                                 case BinKind::Mul:
                                   if (ga) ga[ia] += gi * pb[ib];
                                   if (gb) gb[ib] += gi * pa[ia];
                                   break;
                               }
                             });
            });
  return out;
}

}  // namespace detail

template <typename S>
TensorT<S> add(const TensorT<S>& a, const TensorT<S>& b) {
  return detail::binary_broadcast("add", detail::BinKind::Add, a, b);
}
template <typename S>
TensorT<S> sub(const TensorT<S>& a, const TensorT<S>& b) {
  return detail::binary_broadcast("sub", detail::BinKind::Sub, a, b);
}
template <typename S>
TensorT<S> mul(const TensorT<S>& a, const TensorT<S>& b) {
  return detail::binary_broadcast("mul", detail::BinKind::Mul, a, b);
}

template <typename S>
TensorT<S> scale(const TensorT<S>& x, double c) {
  TensorT<S> out = TensorT<S>::zeros(x.shape());
  const S* px = x.data();
  S* po = out.data();
  const S sc = static_cast<S>(c);
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) po[i] = px[i] * sc;
  ensure_finite(out, "scale");
  record_op(out, "scale", {&x}, [x, sc, n](const S* g) {
    if (!x.requires_grad_) return;
    S* gx = x.grad_->data();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i] * sc;
  });
  return out;
}

template <typename S>
TensorT<S> add_scalar(const TensorT<S>& x, double c) {
  TensorT<S> out = TensorT<S>::zeros(x.shape());
  const S* px = x.data();
  S* po = out.data();
  const S sc = static_cast<S>(c);
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) po[i] = px[i] + sc;
  ensure_finite(out, "add_scalar");
  record_op(out, "add_scalar", {&x}, [x, n](const S* g) {
    if (!x.requires_grad_) return;
    S* gx = x.grad_->data();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------
template <typename S>
TensorT<S> relu(const TensorT<S>& x) {
  TensorT<S> out = TensorT<S>::zeros(x.shape());
  const S* px = x.data();
  S* po = out.data();
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) po[i] = px[i] > S(0) ? px[i] : S(0);
  ensure_finite(out, "relu");
  record_op(out, "relu", {&x}, [x, n](const S* g) {
    if (!x.requires_grad_) return;
    S* gx = x.grad_->data();
    const S* px = x.data();
    for (std::int64_t i = 0; i < n; ++i) {
      if (px[i] > S(0)) gx[i] += g[i];
    }
  });
  return out;
}

template <typename S>
TensorT<S> sigmoid(const TensorT<S>& x) {
  TensorT<S> out = TensorT<S>::zeros(x.shape());
  const S* px = x.data();
  S* po = out.data();
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) {
    const double v = static_cast<double>(px[i]);
    // numerically stable in both tails
    const double y = v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
    po[i] = static_cast<S>(y);
  }
  ensure_finite(out, "sigmoid");
  record_op(out, "sigmoid", {&x}, [x, od = out.data_, n](const S* g) {
    if (!x.requires_grad_) return;
    S* gx = x.grad_->data();
    const S* y = od->data();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i] * y[i] * (S(1) - y[i]);
  });
  return out;
}

// Pass-through gradient inside [lo, hi], zero outside.
template <typename S>
TensorT<S> clamp(const TensorT<S>& x, double lo, double hi) {
  check(lo < hi, "clamp: lo must be < hi");
  TensorT<S> out = TensorT<S>::zeros(x.shape());
  const S* px = x.data();
  S* po = out.data();
  const S l = static_cast<S>(lo), h = static_cast<S>(hi);
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) po[i] = std::min(h, std::max(l, px[i]));
  ensure_finite(out, "clamp");
  record_op(out, "clamp", {&x}, [x, l, h, n](const S* g) {
    if (!x.requires_grad_) return;
    S* gx = x.grad_->data();
    const S* px = x.data();
    for (std::int64_t i = 0; i < n; ++i) {
      if (px[i] >= l && px[i] <= h) gx[i] += g[i];
    }
  });
  return out;
}

// a + w*(b - a), all three the same shape. Exact fixed point at a == b.
template <typename S>
TensorT<S> lerp(const TensorT<S>& a, const TensorT<S>& b, const TensorT<S>& w) {
  check(a.shape() == b.shape() && a.shape() == w.shape(),
        "lerp: shapes must match, got " + shape_str(a.shape()) + ", " + shape_str(b.shape()) +
            ", " + shape_str(w.shape()));
  TensorT<S> out = TensorT<S>::zeros(a.shape());
  const S* pa = a.data();
  const S* pb = b.data();
  const S* pw = w.data();
  S* po = out.data();
  const std::int64_t n = out.size();
  for (std::int64_t i = 0; i < n; ++i) po[i] = pa[i] + pw[i] * (pb[i] - pa[i]);
  ensure_finite(out, "lerp");
  record_op(out, "lerp", {&a, &b, &w}, [a, b, w, n](const S* g) {
    const S* pa = a.data();
    const S* pb = b.data();
    const S* pw = w.data();
    S* ga = a.requires_grad_ ? a.grad_->data() : nullptr;
    S* gb = b.requires_grad_ ? b.grad_->data() : nullptr;
    S* gw = w.requires_grad_ ? w.grad_->data() : nullptr;
    for (std::int64_t i = 0; i < n; ++i) {
      if (ga) ga[i] += g[i] * (S(1) - pw[i]);
      if (gb) gb[i] += g[i] * pw[i];
      if (gw) gw[i] += g[i] * (pb[i] - pa[i]);
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------
template <typename S>
TensorT<S> reshape(const TensorT<S>& x, Shape shape) {
  check(shape_numel(shape) == x.size(),
        "reshape: cannot view " + shape_str(x.shape()) + " as " + shape_str(shape));
  TensorT<S> out = TensorT<S>::zeros(std::move(shape));
  std::memcpy(out.data(), x.data(), sizeof(S) * static_cast<std::size_t>(x.size()));
  const std::int64_t n = x.size();
  record_op(out, "reshape", {&x}, [x, n](const S* g) {
    if (!x.requires_grad_) return;
    S* gx = x.grad_->data();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += g[i];
  });
  return out;
}

// Concatenate rank-3 tensors [C_i, H, W] along the channel axis.
template <typename S>
TensorT<S> concat_channels(const std::vector<TensorT<S>>& xs) {
  check(!xs.empty(), "concat_channels: empty input list");
  const int h = xs[0].extent(1), w = xs[0].extent(2);
  int ctotal = 0;
  for (const auto& x : xs) {
    check(x.rank() == 3, "concat_channels: inputs must be rank-3, got " + shape_str(x.shape()));
    check(x.extent(1) == h && x.extent(2) == w,
          "concat_channels: spatial extents differ: " + shape_str(x.shape()));
    ctotal += x.extent(0);
  }
  TensorT<S> out = TensorT<S>::zeros({ctotal, h, w});
  S* po = out.data();
  std::int64_t off = 0;
  for (const auto& x : xs) {
    std::memcpy(po + off, x.data(), sizeof(S) * static_cast<std::size_t>(x.size()));
    off += x.size();
  }
  if (grad_enabled()) {
    bool any = false;
    for (const auto& x : xs) any = any || x.requires_grad_;
    if (any) {
      out.requires_grad_ = true;
      out.alloc_grad();
      auto node = std::make_shared<NodeT<S>>();
      node->op = "concat_channels";
      for (const auto& x : xs) {
        if (x.node_) node->parents.push_back(x.node_);
      }
      node->apply = [inputs = xs, og = out.grad_]() {
        const S* g = og->data();
        std::int64_t off = 0;
        for (const auto& x : inputs) {
          if (x.requires_grad_) {
            S* gx = x.grad_->data();
            for (std::int64_t i = 0; i < x.size(); ++i) gx[i] += g[off + i];
          }
          off += x.size();
        }
      };
      out.node_ = node;
    }
  }
  return out;
}

// Stack N rank-3 tensors [C, H, W] into [C, N, H, W] (depth axis = list
// position). slice_depth inverts it exactly.
template <typename S>
TensorT<S> stack_depth(const std::vector<TensorT<S>>& xs) {
  check(!xs.empty(), "stack_depth: empty input list");
  const int c = xs[0].extent(0), h = xs[0].extent(1), w = xs[0].extent(2);
  for (const auto& x : xs) {
    check(x.rank() == 3 && x.extent(0) == c && x.extent(1) == h && x.extent(2) == w,
          "stack_depth: all inputs must share shape " + shape_str(xs[0].shape()) + ", got " +
              shape_str(x.shape()));
  }
  const int n = static_cast<int>(xs.size());
  TensorT<S> out = TensorT<S>::zeros({c, n, h, w});
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  S* po = out.data();
  for (int ci = 0; ci < c; ++ci) {
    for (int ni = 0; ni < n; ++ni) {
      std::memcpy(po + (static_cast<std::int64_t>(ci) * n + ni) * plane,
                  xs[static_cast<std::size_t>(ni)].data() + ci * plane,
                  sizeof(S) * static_cast<std::size_t>(plane));
    }
  }
  if (grad_enabled()) {
    bool any = false;
    for (const auto& x : xs) any = any || x.requires_grad_;
    if (any) {
      out.requires_grad_ = true;
      out.alloc_grad();
      auto node = std::make_shared<NodeT<S>>();
      node->op = "stack_depth";
      for (const auto& x : xs) {
        if (x.node_) node->parents.push_back(x.node_);
      }
      node->apply = [inputs = xs, og = out.grad_, c, n, plane]() {
        const S* g = og->data();
        for (int ni = 0; ni < n; ++ni) {
          const auto& x = inputs[static_cast<std::size_t>(ni)];
          if (!x.requires_grad_) continue;
          S* gx = x.grad_->data();
          for (int ci = 0; ci < c; ++ci) {
            const S* gs = g + (static_cast<std::int64_t>(ci) * n + ni) * plane;
            S* gd = gx + ci * plane;
            for (std::int64_t i = 0; i < plane; ++i) gd[i] += gs[i];
          }
        }
      };
      out.node_ = node;
    }
  }
  return out;
}

// Extract depth slice n from [C, N, H, W] -> [C, H, W].
template <typename S>
TensorT<S> slice_depth(const TensorT<S>& x, int n) {
  check(x.rank() == 4, "slice_depth: input must be rank-4, got " + shape_str(x.shape()));
  const int c = x.extent(0), nn = x.extent(1), h = x.extent(2), w = x.extent(3);
  check(n >= 0 && n < nn, "slice_depth: index " + std::to_string(n) +
                              " out of range for depth " + std::to_string(nn));
  TensorT<S> out = TensorT<S>::zeros({c, h, w});
  const std::int64_t plane = static_cast<std::int64_t>(h) * w;
  const S* px = x.data();
  S* po = out.data();
  for (int ci = 0; ci < c; ++ci) {
    std::memcpy(po + ci * plane, px + (static_cast<std::int64_t>(ci) * nn + n) * plane,
                sizeof(S) * static_cast<std::size_t>(plane));
  }
  record_op(out, "slice_depth", {&x}, [x, c, nn, n, plane](const S* g) {
    if (!x.requires_grad_) return;
    S* gx = x.grad_->data();
    for (int ci = 0; ci < c; ++ci) {
      S* gd = gx + (static_cast<std::int64_t>(ci) * nn + n) * plane;
      const S* gs = g + ci * plane;
      for (std::int64_t i = 0; i < plane; ++i) gd[i] += gs[i];
    }
  });
  return out;
}

template <typename S>
TensorT<S> transpose2(const TensorT<S>& x) {
  check(x.rank() == 2, "transpose2: input must be rank-2, got " + shape_str(x.shape()));
  const int m = x.extent(0), n = x.extent(1);
  TensorT<S> out = TensorT<S>::zeros({n, m});
  const S* px = x.data();
  S* po = out.data();
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j)
      po[static_cast<std::int64_t>(j) * m + i] = px[static_cast<std::int64_t>(i) * n + j];
  record_op(out, "transpose2", {&x}, [x, m, n](const S* g) {
    if (!x.requires_grad_) return;
    S* gx = x.grad_->data();
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < n; ++j)
        gx[static_cast<std::int64_t>(i) * n + j] += g[static_cast<std::int64_t>(j) * m + i];
  });
  return out;
}

// ---------------------------------------------------------------------------
// matmul: [m,k] x [k,n] -> [m,n]
// ---------------------------------------------------------------------------
template <typename S>
TensorT<S> matmul(const TensorT<S>& a, const TensorT<S>& b) {
  check(a.rank() == 2 && b.rank() == 2,
        "matmul: inputs must be rank-2, got " + shape_str(a.shape()) + " and " +
            shape_str(b.shape()));
  const int m = a.extent(0), k = a.extent(1);
  check(b.extent(0) == k, "matmul: inner extents differ: " + shape_str(a.shape()) + " x " +
                              shape_str(b.shape()));
  const int n = b.extent(1);
  TensorT<S> out = TensorT<S>::zeros({m, n});
  gemm_nn(a.data(), b.data(), out.data(), m, k, n);
  ensure_finite(out, "matmul");
  record_op(out, "matmul", {&a, &b}, [a, b, m, k, n](const S* g) {
    if (a.requires_grad_) gemm_nt(g, b.data(), a.grad_->data(), m, n, k, /*accumulate=*/true);
    if (b.requires_grad_) gemm_tn(a.data(), g, b.grad_->data(), k, m, n, /*accumulate=*/true);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Reductions (double accumulation)
// ---------------------------------------------------------------------------
template <typename S>
TensorT<S> sum(const TensorT<S>& x) {
  double acc = 0.0;
  const S* px = x.data();
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) acc += static_cast<double>(px[i]);
  TensorT<S> out = TensorT<S>::from({1}, {static_cast<S>(acc)});
  ensure_finite(out, "sum");
  record_op(out, "sum", {&x}, [x, n](const S* g) {
    if (!x.requires_grad_) return;
    const S gi = g[0];
    S* gx = x.grad_->data();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += gi;
  });
  return out;
}

template <typename S>
TensorT<S> mean(const TensorT<S>& x) {
  double acc = 0.0;
  const S* px = x.data();
  const std::int64_t n = x.size();
  for (std::int64_t i = 0; i < n; ++i) acc += static_cast<double>(px[i]);
  TensorT<S> out = TensorT<S>::from({1}, {static_cast<S>(acc / static_cast<double>(n))});
  ensure_finite(out, "mean");
  record_op(out, "mean", {&x}, [x, n](const S* g) {
    if (!x.requires_grad_) return;
    const S gi = static_cast<S>(static_cast<double>(g[0]) / static_cast<double>(n));
    S* gx = x.grad_->data();
    for (std::int64_t i = 0; i < n; ++i) gx[i] += gi;
  });
  return out;
}

// [C,H,W] -> [C]: per-channel spatial mean.
template <typename S>
TensorT<S> global_avg_pool(const TensorT<S>& x) {
  check(x.rank() == 3, "global_avg_pool: input must be rank-3, got " + shape_str(x.shape()));
  const int c = x.extent(0);
  const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
  TensorT<S> out = TensorT<S>::zeros({c});
  const S* px = x.data();
  S* po = out.data();
  for (int ci = 0; ci < c; ++ci) {
    double acc = 0.0;
    const S* p = px + ci * plane;
    for (std::int64_t i = 0; i < plane; ++i) acc += static_cast<double>(p[i]);
    po[ci] = static_cast<S>(acc / static_cast<double>(plane));
  }
  ensure_finite(out, "global_avg_pool");
  record_op(out, "global_avg_pool", {&x}, [x, c, plane](const S* g) {
    if (!x.requires_grad_) return;
    S* gx = x.grad_->data();
    for (int ci = 0; ci < c; ++ci) {
      const S gi = static_cast<S>(static_cast<double>(g[ci]) / static_cast<double>(plane));
      S* gp = gx + ci * plane;
      for (std::int64_t i = 0; i < plane; ++i) gp[i] += gi;
    }
  });
  return out;
}

// [C,H,W] -> [1,H,W]: mean over channels at each location.
template <typename S>
TensorT<S> channel_mean(const TensorT<S>& x) {
  check(x.rank() == 3, "channel_mean: input must be rank-3, got " + shape_str(x.shape()));
  const int c = x.extent(0);
  const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
  TensorT<S> out = TensorT<S>::zeros({1, x.extent(1), x.extent(2)});
  const S* px = x.data();
  S* po = out.data();
  for (std::int64_t i = 0; i < plane; ++i) {
    double acc = 0.0;
    for (int ci = 0; ci < c; ++ci) acc += static_cast<double>(px[ci * plane + i]);
    po[i] = static_cast<S>(acc / c);
  }
  ensure_finite(out, "channel_mean");
  record_op(out, "channel_mean", {&x}, [x, c, plane](const S* g) {
    if (!x.requires_grad_) return;
    S* gx = x.grad_->data();
    for (std::int64_t i = 0; i < plane; ++i) {
      const S gi = static_cast<S>(static_cast<double>(g[i]) / c);
      for (int ci = 0; ci < c; ++ci) gx[ci * plane + i] += gi;
    }
  });
  return out;
}

// [C,H,W] -> [1,H,W]: max over channels; gradient routes to the first
// maximal channel at each location (deterministic tie-break).
template <typename S>
TensorT<S> channel_max(const TensorT<S>& x) {
  check(x.rank() == 3, "channel_max: input must be rank-3, got " + shape_str(x.shape()));
  const int c = x.extent(0);
  const std::int64_t plane = static_cast<std::int64_t>(x.extent(1)) * x.extent(2);
  TensorT<S> out = TensorT<S>::zeros({1, x.extent(1), x.extent(2)});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(plane), 0);
  const S* px = x.data();
  S* po = out.data();
  for (std::int64_t i = 0; i < plane; ++i) {
    S best = px[i];
    int bi = 0;
    for (int ci = 1; ci < c; ++ci) {
      const S v = px[ci * plane + i];
      if (v > best) {
        best = v;
        bi = ci;
      }
    }
    po[i] = best;
    (*argmax)[static_cast<std::size_t>(i)] = bi;
  }
  ensure_finite(out, "channel_max");
  record_op(out, "channel_max", {&x}, [x, argmax, plane](const S* g) {
    if (!x.requires_grad_) return;
    S* gx = x.grad_->data();
    for (std::int64_t i = 0; i < plane; ++i) {
      gx[(*argmax)[static_cast<std::size_t>(i)] * plane + i] += g[i];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// softmax over a rank-1 tensor (max-shifted, computed in double).
// ---------------------------------------------------------------------------
template <typename S>
TensorT<S> softmax_vec(const TensorT<S>& x) {
  check(x.rank() == 1, "softmax_vec: input must be rank-1, got " + shape_str(x.shape()));
  const std::int64_t n = x.size();
  const S* px = x.data();
  double mx = static_cast<double>(px[0]);
  for (std::int64_t i = 1; i < n; ++i) mx = std::max(mx, static_cast<double>(px[i]));
  std::vector<double> e(static_cast<std::size_t>(n));
  double z = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    e[static_cast<std::size_t>(i)] = std::exp(static_cast<double>(px[i]) - mx);
    z += e[static_cast<std::size_t>(i)];
  }
  TensorT<S> out = TensorT<S>::zeros(x.shape());
  S* po = out.data();
  for (std::int64_t i = 0; i < n; ++i) po[i] = static_cast<S>(e[static_cast<std::size_t>(i)] / z);
  ensure_finite(out, "softmax_vec");
  record_op(out, "softmax_vec", {&x}, [x, od = out.data_, n](const S* g) {
    if (!x.requires_grad_) return;
    const S* y = od->data();
    double dot = 0.0;
    for (std::int64_t i = 0; i < n; ++i) dot += static_cast<double>(g[i]) * y[i];
    S* gx = x.grad_->data();
    for (std::int64_t i = 0; i < n; ++i) {
      gx[i] += static_cast<S>(y[i] * (static_cast<double>(g[i]) - dot));
    }
  });
  return out;
}

// [m,n] -> [m]: row-wise max; gradient routes to the first maximal entry of
// each row.
template <typename S>
TensorT<S> rowmax(const TensorT<S>& x) {
  check(x.rank() == 2, "rowmax: input must be rank-2, got " + shape_str(x.shape()));
  const int m = x.extent(0), n = x.extent(1);
  TensorT<S> out = TensorT<S>::zeros({m});
  auto argmax = std::make_shared<std::vector<int>>(static_cast<std::size_t>(m), 0);
  const S* px = x.data();
  S* po = out.data();
  for (int i = 0; i < m; ++i) {
    const S* row = px + static_cast<std::int64_t>(i) * n;
    S best = row[0];
    int bj = 0;
    for (int j = 1; j < n; ++j) {
      if (row[j] > best) {
        best = row[j];
        bj = j;
      }
    }
    po[i] = best;
    (*argmax)[static_cast<std::size_t>(i)] = bj;
  }
  ensure_finite(out, "rowmax");
  record_op(out, "rowmax", {&x}, [x, argmax, m, n](const S* g) {
    if (!x.requires_grad_) return;
    S* gx = x.grad_->data();
    for (int i = 0; i < m; ++i) {
      gx[static_cast<std::int64_t>(i) * n + (*argmax)[static_cast<std::size_t>(i)]] += g[i];
    }
  });
  return out;
}

// ---------------------------------------------------------------------------
// Clamped binary cross-entropy, mean over all elements.
// Predictions are clamped to [1e-7, 1 - 1e-7] inside the loss; targets must
// be exactly 0 or 1. Clamped positions get zero gradient.
// ---------------------------------------------------------------------------
inline constexpr double kBceClamp = 1e-7;

template <typename S>
TensorT<S> bce_mean(const TensorT<S>& pred, const TensorT<S>& target) {
  check(pred.shape() == target.shape(), "bce_mean: shapes differ: " + shape_str(pred.shape()) +
                                            " vs " + shape_str(target.shape()));
  const std::int64_t n = pred.size();
  const S* pm = pred.data();
  const S* pt = target.data();
  const double lo = kBceClamp, hi = 1.0 - kBceClamp;
  double acc = 0.0;
  for (std::int64_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(pt[i]);
    if (t != 0.0 && t != 1.0) {
      throw ShapeError("bce_mean: targets must be binary (0 or 1)");
    }
    const double m = std::min(hi, std::max(lo, static_cast<double>(pm[i])));
    acc -= t * std::log(m) + (1.0 - t) * std::log1p(-m);
  }
  TensorT<S> out = TensorT<S>::from({1}, {static_cast<S>(acc / static_cast<double>(n))});
  ensure_finite(out, "bce_mean");
  record_op(out, "bce_mean", {&pred}, [pred, target, n, lo, hi](const S* g) {
    if (!pred.requires_grad_) return;
    const double gs = static_cast<double>(g[0]) / static_cast<double>(n);
    const S* pm = pred.data();
    const S* pt = target.data();
    S* gx = pred.grad_->data();
    for (std::int64_t i = 0; i < n; ++i) {
      const double m = static_cast<double>(pm[i]);
      if (m < lo || m > hi) continue;  // clamp region: zero gradient
      const double t = static_cast<double>(pt[i]);
      gx[i] += static_cast<S>(gs * (m - t) / (m * (1.0 - m)));
    }
  });
  return out;
}

}  // namespace glnet
