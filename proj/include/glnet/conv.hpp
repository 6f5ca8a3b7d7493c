#pragma once

// Convolutions (cross-correlation convention, no kernel flipping):
//  - conv2d: [Cin,H,W] * [Cout,Cin,kh,kw] -> [Cout,OH,OW], zero padding,
//    output extents must divide exactly (error otherwise).
//  - conv3d: [Cin,D,H,W] * [Cout,Cin,kd,kh,kw] -> [Cout,D-kd+1,OH,OW],
//    stride 1, spatial zero padding only — depth is never padded.
//  - transposed_conv2d: [Cin,H,W] * [Cin,Cout,4,4] stride 2 pad 1 ->
//    [Cout,2H,2W] (the gradient-of-conv formulation).
//
// All three lower to GEMM via im2col/vol2col; column buffers are cached for
// the backward pass.

#include <cstdint>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "glnet/gemm.hpp"
#include "glnet/ops.hpp"
#include "glnet/tensor.hpp"

namespace glnet {
namespace detail {

// cols[(c*kh + i)*kw + j][oh*OW + ow] = x[c][oh*stride + i - pad][ow*stride + j - pad]
template <typename S>
void im2col(const S* x, int C, int H, int W, int kh, int kw, int stride, int pad, int OH,
            int OW, S* cols) {
  const std::int64_t M = static_cast<std::int64_t>(OH) * OW;
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        S* dst = cols + ((static_cast<std::int64_t>(c) * kh + i) * kw + j) * M;
        for (int oh = 0; oh < OH; ++oh) {
          const int ih = oh * stride + i - pad;
          S* drow = dst + static_cast<std::int64_t>(oh) * OW;
          if (ih < 0 || ih >= H) {
            std::memset(drow, 0, sizeof(S) * static_cast<std::size_t>(OW));
            continue;
          }
          const S* srow = x + (static_cast<std::int64_t>(c) * H + ih) * W;
          for (int ow = 0; ow < OW; ++ow) {
            const int iw = ow * stride + j - pad;
            drow[ow] = (iw >= 0 && iw < W) ? srow[iw] : S(0);
          }
        }
      }
    }
  }
}

// Scatter-add transpose of im2col.
template <typename S>
void col2im_add(const S* cols, int C, int H, int W, int kh, int kw, int stride, int pad, int OH,
                int OW, S* x) {
  const std::int64_t M = static_cast<std::int64_t>(OH) * OW;
  for (int c = 0; c < C; ++c) {
    for (int i = 0; i < kh; ++i) {
      for (int j = 0; j < kw; ++j) {
        const S* src = cols + ((static_cast<std::int64_t>(c) * kh + i) * kw + j) * M;
        for (int oh = 0; oh < OH; ++oh) {
          const int ih = oh * stride + i - pad;
          if (ih < 0 || ih >= H) continue;
          S* xrow = x + (static_cast<std::int64_t>(c) * H + ih) * W;
          const S* srow = src + static_cast<std::int64_t>(oh) * OW;
          for (int ow = 0; ow < OW; ++ow) {
            const int iw = ow * stride + j - pad;
            if (iw >= 0 && iw < W) xrow[iw] += srow[ow];
          }
        }
      }
    }
  }
}

// 3D gather: depth valid (no padding), spatial zero-padded, stride 1.
// cols[((c*kd + d)*kh + i)*kw + j][(od*OH + oh)*OW + ow]
//   = x[c][od + d][oh + i - pad][ow + j - pad]
template <typename S>
void vol2col(const S* x, int C, int D, int H, int W, int kd, int kh, int kw, int pad, int OD,
             int OH, int OW, S* cols) {
  const std::int64_t M = static_cast<std::int64_t>(OD) * OH * OW;
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  for (int c = 0; c < C; ++c) {
    for (int d = 0; d < kd; ++d) {
      for (int i = 0; i < kh; ++i) {
        for (int j = 0; j < kw; ++j) {
          S* dst = cols + (((static_cast<std::int64_t>(c) * kd + d) * kh + i) * kw + j) * M;
          for (int od = 0; od < OD; ++od) {
            const int id = od + d;  // depth is never padded
            const S* xplane = x + (static_cast<std::int64_t>(c) * D + id) * plane;
            for (int oh = 0; oh < OH; ++oh) {
              const int ih = oh + i - pad;
              S* drow = dst + (static_cast<std::int64_t>(od) * OH + oh) * OW;
              if (ih < 0 || ih >= H) {
                std::memset(drow, 0, sizeof(S) * static_cast<std::size_t>(OW));
                continue;
              }
              const S* srow = xplane + static_cast<std::int64_t>(ih) * W;
              for (int ow = 0; ow < OW; ++ow) {
                const int iw = ow + j - pad;
                drow[ow] = (iw >= 0 && iw < W) ? srow[iw] : S(0);
              }
            }
          }
        }
      }
    }
  }
}

template <typename S>
void col2vol_add(const S* cols, int C, int D, int H, int W, int kd, int kh, int kw, int pad,
                 int OD, int OH, int OW, S* x) {
  const std::int64_t M = static_cast<std::int64_t>(OD) * OH * OW;
  const std::int64_t plane = static_cast<std::int64_t>(H) * W;
  for (int c = 0; c < C; ++c) {
    for (int d = 0; d < kd; ++d) {
      for (int i = 0; i < kh; ++i) {
        for (int j = 0; j < kw; ++j) {
          const S* src = cols + (((static_cast<std::int64_t>(c) * kd + d) * kh + i) * kw + j) * M;
          for (int od = 0; od < OD; ++od) {
            const int id = od + d;
            S* xplane = x + (static_cast<std::int64_t>(c) * D + id) * plane;
            for (int oh = 0; oh < OH; ++oh) {
              const int ih = oh + i - pad;
              if (ih < 0 || ih >= H) continue;
              S* xrow = xplane + static_cast<std::int64_t>(ih) * W;
              const S* srow = src + (static_cast<std::int64_t>(od) * OH + oh) * OW;
              for (int ow = 0; ow < OW; ++ow) {
                const int iw = ow + j - pad;
                if (iw >= 0 && iw < W) xrow[iw] += srow[ow];
              }
            }
          }
        }
      }
    }
  }
}

template <typename S>
void add_bias_rows(S* out, const S* bias, int rows, std::int64_t cols) {
  for (int r = 0; r < rows; ++r) {
    S* p = out + r * cols;
    const S b = bias[r];
    for (std::int64_t i = 0; i < cols; ++i) p[i] += b;
  }
}

template <typename S>
void bias_grad_rows(const S* g, S* gbias, int rows, std::int64_t cols) {
  for (int r = 0; r < rows; ++r) {
    const S* p = g + r * cols;
    double acc = 0.0;
    for (std::int64_t i = 0; i < cols; ++i) acc += static_cast<double>(p[i]);
    gbias[r] += static_cast<S>(acc);
  }
}

}  // namespace detail

template <typename S>
TensorT<S> conv2d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b, int stride,
                  int pad) {
  check(x.rank() == 3, "conv2d: input must be [Cin,H,W], got " + shape_str(x.shape()));
  check(w.rank() == 4, "conv2d: weight must be [Cout,Cin,kh,kw], got " + shape_str(w.shape()));
  check(b.rank() == 1, "conv2d: bias must be [Cout], got " + shape_str(b.shape()));
  const int cin = x.extent(0), h = x.extent(1), ww = x.extent(2);
  const int cout = w.extent(0), kh = w.extent(2), kw = w.extent(3);
  check(w.extent(1) == cin, "conv2d: weight expects " + std::to_string(w.extent(1)) +
                                " input channels, input has " + std::to_string(cin));
  check(b.extent(0) == cout, "conv2d: bias extent " + std::to_string(b.extent(0)) +
                                 " does not match output channels " + std::to_string(cout));
  check(stride >= 1, "conv2d: stride must be >= 1");
  check(pad >= 0, "conv2d: pad must be >= 0");
  check(h + 2 * pad >= kh && ww + 2 * pad >= kw,
        "conv2d: kernel " + std::to_string(kh) + "x" + std::to_string(kw) +
            " larger than padded input " + shape_str(x.shape()) + " with pad " +
            std::to_string(pad));
  check((h + 2 * pad - kh) % stride == 0 && (ww + 2 * pad - kw) % stride == 0,
        "conv2d: non-integral output extent for input " + shape_str(x.shape()) + ", kernel " +
            std::to_string(kh) + "x" + std::to_string(kw) + ", stride " + std::to_string(stride) +
            ", pad " + std::to_string(pad));
  const int oh = (h + 2 * pad - kh) / stride + 1;
  const int ow = (ww + 2 * pad - kw) / stride + 1;
  const std::int64_t K = static_cast<std::int64_t>(cin) * kh * kw;
  const std::int64_t M = static_cast<std::int64_t>(oh) * ow;

  auto cols = std::make_shared<std::vector<S>>(static_cast<std::size_t>(K * M));
  detail::im2col(x.data(), cin, h, ww, kh, kw, stride, pad, oh, ow, cols->data());
  TensorT<S> out = TensorT<S>::zeros({cout, oh, ow});
  gemm_nn(w.data(), cols->data(), out.data(), cout, K, M);
  detail::add_bias_rows(out.data(), b.data(), cout, M);
  ensure_finite(out, "conv2d");

  record_op(out, "conv2d", {&x, &w, &b},
            [x, w, b, cols, cin, h, ww, kh, kw, stride, pad, oh, ow, cout, K, M](const S* g) {
              if (b.requires_grad_) detail::bias_grad_rows(g, b.grad_->data(), cout, M);
              if (w.requires_grad_) {
                // dW[cout,K] += dY[cout,M] * cols[K,M]^T
                gemm_nt(g, cols->data(), w.grad_->data(), cout, M, K, /*accumulate=*/true);
              }
              if (x.requires_grad_) {
                std::vector<S> dcols(static_cast<std::size_t>(K * M));
                // dcols[K,M] = W[cout,K]^T * dY[cout,M]
                gemm_tn(w.data(), g, dcols.data(), K, cout, M);
                detail::col2im_add(dcols.data(), cin, h, ww, kh, kw, stride, pad, oh, ow,
                                   x.grad_->data());
              }
            });
  return out;
}

template <typename S>
TensorT<S> conv3d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b,
                  int spatial_pad) {
  check(x.rank() == 4, "conv3d: input must be [Cin,D,H,W], got " + shape_str(x.shape()));
  check(w.rank() == 5, "conv3d: weight must be [Cout,Cin,kd,kh,kw], got " + shape_str(w.shape()));
  check(b.rank() == 1, "conv3d: bias must be [Cout], got " + shape_str(b.shape()));
  const int cin = x.extent(0), d = x.extent(1), h = x.extent(2), ww = x.extent(3);
  const int cout = w.extent(0), kd = w.extent(2), kh = w.extent(3), kw = w.extent(4);
  check(w.extent(1) == cin, "conv3d: weight expects " + std::to_string(w.extent(1)) +
                                " input channels, input has " + std::to_string(cin));
  check(b.extent(0) == cout, "conv3d: bias extent does not match output channels");
  check(spatial_pad >= 0, "conv3d: spatial_pad must be >= 0");
  check(kd <= d, "conv3d: depth kernel " + std::to_string(kd) + " exceeds input depth " +
                     std::to_string(d) + " (depth is never padded)");
  check(h + 2 * spatial_pad >= kh && ww + 2 * spatial_pad >= kw,
        "conv3d: spatial kernel larger than padded input");
  const int od = d - kd + 1;
  const int oh = h + 2 * spatial_pad - kh + 1;
  const int ow = ww + 2 * spatial_pad - kw + 1;
  const std::int64_t K = static_cast<std::int64_t>(cin) * kd * kh * kw;
  const std::int64_t M = static_cast<std::int64_t>(od) * oh * ow;

  auto cols = std::make_shared<std::vector<S>>(static_cast<std::size_t>(K * M));
  detail::vol2col(x.data(), cin, d, h, ww, kd, kh, kw, spatial_pad, od, oh, ow, cols->data());
  TensorT<S> out = TensorT<S>::zeros({cout, od, oh, ow});
  gemm_nn(w.data(), cols->data(), out.data(), cout, K, M);
  detail::add_bias_rows(out.data(), b.data(), cout, M);
  ensure_finite(out, "conv3d");

  record_op(out, "conv3d", {&x, &w, &b},
            [x, w, b, cols, cin, d, h, ww, kd, kh, kw, spatial_pad, od, oh, ow, cout, K,
             M](const S* g) {
              if (b.requires_grad_) detail::bias_grad_rows(g, b.grad_->data(), cout, M);
              if (w.requires_grad_) {
                gemm_nt(g, cols->data(), w.grad_->data(), cout, M, K, /*accumulate=*/true);
              }
              if (x.requires_grad_) {
                std::vector<S> dcols(static_cast<std::size_t>(K * M));
                gemm_tn(w.data(), g, dcols.data(), K, cout, M);
                detail::col2vol_add(dcols.data(), cin, d, h, ww, kd, kh, kw, spatial_pad, od, oh,
                                    ow, x.grad_->data());
              }
            });
  return out;
}

// Fixed 4x4 kernel, stride 2, pad 1: exact x2 upsampling.
template <typename S>
TensorT<S> transposed_conv2d(const TensorT<S>& x, const TensorT<S>& w, const TensorT<S>& b) {
  check(x.rank() == 3, "transposed_conv2d: input must be [Cin,H,W], got " + shape_str(x.shape()));
  check(w.rank() == 4, "transposed_conv2d: weight must be [Cin,Cout,4,4], got " +
                           shape_str(w.shape()));
  check(w.extent(2) == 4 && w.extent(3) == 4,
        "transposed_conv2d: kernel must be 4x4, got " + shape_str(w.shape()));
  const int cin = x.extent(0), h = x.extent(1), ww = x.extent(2);
  const int cout = w.extent(1);
  check(w.extent(0) == cin, "transposed_conv2d: weight expects " + std::to_string(w.extent(0)) +
                                " input channels, input has " + std::to_string(cin));
  check(b.rank() == 1 && b.extent(0) == cout,
        "transposed_conv2d: bias must be [Cout], got " + shape_str(b.shape()));
  constexpr int kk = 4, stride = 2, pad = 1;
  const int oh = 2 * h, ow = 2 * ww;
  const std::int64_t K = static_cast<std::int64_t>(cout) * kk * kk;  // gather rows over OUTPUT
  const std::int64_t M = static_cast<std::int64_t>(h) * ww;

  // out = col2im(W~^T [K,Cin] x X [Cin,M]) where W~ = w viewed as [Cin, K].
  TensorT<S> out = TensorT<S>::zeros({cout, oh, ow});
  {
    std::vector<S> tmp(static_cast<std::size_t>(K * M));
    gemm_tn(w.data(), x.data(), tmp.data(), K, cin, M);
    detail::col2im_add(tmp.data(), cout, oh, ow, kk, kk, stride, pad, h, ww, out.data());
    detail::add_bias_rows(out.data(), b.data(), cout, static_cast<std::int64_t>(oh) * ow);
  }
  ensure_finite(out, "transposed_conv2d");

  record_op(out, "transposed_conv2d", {&x, &w, &b},
            [x, w, b, cin, h, ww, cout, oh, ow, K, M](const S* g) {
              if (b.requires_grad_) {
                detail::bias_grad_rows(g, b.grad_->data(), cout,
                                       static_cast<std::int64_t>(oh) * ow);
              }
              if (!x.requires_grad_ && !w.requires_grad_) return;
              // Gcols[K,M] = im2col(dOut) over the output grid.
              std::vector<S> gcols(static_cast<std::size_t>(K * M));
              detail::im2col(g, cout, oh, ow, kk, kk, stride, pad, h, ww, gcols.data());
              if (x.requires_grad_) {
                // dX[Cin,M] += W~[Cin,K] * Gcols[K,M]
                gemm_nn(w.data(), gcols.data(), x.grad_->data(), cin, K, M, /*accumulate=*/true);
              }
              if (w.requires_grad_) {
                // dW~[Cin,K] += X[Cin,M] * Gcols[K,M]^T
                gemm_nt(x.data(), gcols.data(), w.grad_->data(), cin, M, K, /*accumulate=*/true);
              }
            });
  return out;
}

}  // namespace glnet
