#pragma once

// Trainable-parameter plumbing shared by all modules:
//  - Parameter: named tensor + fan metadata for Glorot init,
//  - conv/deconv layer wrappers that own their weights,
//  - linear() composition for the attention MLPs,
//  - glorot_init: weights ~ U(-b, b), b = sqrt(6/(fan_in+fan_out)); biases 0.
//
// Modules register parameters in a fixed construction order; that order
// defines checkpoint layout, init sequence, and optimizer state order.

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "glnet/conv.hpp"
#include "glnet/ops.hpp"
#include "glnet/rng.hpp"
#include "glnet/tensor.hpp"

namespace glnet {

template <typename S>
struct Parameter {
  std::string name;
  TensorT<S> tensor;
  std::int64_t fan_in = 0;
  std::int64_t fan_out = 0;
  bool is_bias = false;

  Parameter() = default;
  Parameter(std::string n, Shape shape, std::int64_t fi, std::int64_t fo, bool bias)
      : name(std::move(n)),
        tensor(TensorT<S>::zeros(std::move(shape))),
        fan_in(fi),
        fan_out(fo),
        is_bias(bias) {
    tensor.set_requires_grad(true);
  }
};

template <typename S>
using ParamRefs = std::vector<Parameter<S>*>;

template <typename S>
void glorot_init(const ParamRefs<S>& params, Rng& rng) {
  for (Parameter<S>* p : params) {
    if (p->is_bias) {
      std::fill(p->tensor.data_->begin(), p->tensor.data_->end(), S(0));
      continue;
    }
    const double bound = std::sqrt(6.0 / static_cast<double>(p->fan_in + p->fan_out));
    S* v = p->tensor.data();
    for (std::int64_t i = 0; i < p->tensor.size(); ++i) {
      v[i] = static_cast<S>(rng.uniform(-bound, bound));
    }
  }
}

// Copy parameter values between scalar types by registry position (names must
// agree); used to build the double-precision twin for finite differences.
template <typename TO, typename FROM>
void copy_params(const ParamRefs<FROM>& src, const ParamRefs<TO>& dst) {
  check(src.size() == dst.size(), "copy_params: registries differ in size");
  for (std::size_t i = 0; i < src.size(); ++i) {
    check(src[i]->name == dst[i]->name,
          "copy_params: name mismatch at position " + std::to_string(i) + ": " + src[i]->name +
              " vs " + dst[i]->name);
    check(src[i]->tensor.shape() == dst[i]->tensor.shape(),
          "copy_params: shape mismatch for " + src[i]->name);
    const FROM* s = src[i]->tensor.data();
    TO* d = dst[i]->tensor.data();
    for (std::int64_t j = 0; j < src[i]->tensor.size(); ++j) d[j] = static_cast<TO>(s[j]);
  }
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------
template <typename S>
struct Conv2dLayer {
  Parameter<S> w, b;
  int stride = 1, pad = 0;

  Conv2dLayer() = default;
  Conv2dLayer(const std::string& prefix, int cin, int cout, int k, int stride_, int pad_)
      : w(prefix + ".w", {cout, cin, k, k}, static_cast<std::int64_t>(cin) * k * k,
          static_cast<std::int64_t>(cout) * k * k, false),
        b(prefix + ".b", {cout}, static_cast<std::int64_t>(cin) * k * k, cout, true),
        stride(stride_),
        pad(pad_) {}

  TensorT<S> forward(const TensorT<S>& x) const { return conv2d(x, w.tensor, b.tensor, stride, pad); }

  void collect(ParamRefs<S>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

template <typename S>
struct Conv3dLayer {
  Parameter<S> w, b;
  int spatial_pad = 1;

  Conv3dLayer() = default;
  Conv3dLayer(const std::string& prefix, int cin, int cout, int kd, int kh, int kw, int spad)
      : w(prefix + ".w", {cout, cin, kd, kh, kw}, static_cast<std::int64_t>(cin) * kd * kh * kw,
          static_cast<std::int64_t>(cout) * kd * kh * kw, false),
        b(prefix + ".b", {cout}, static_cast<std::int64_t>(cin) * kd * kh * kw, cout, true),
        spatial_pad(spad) {}

  TensorT<S> forward(const TensorT<S>& x) const { return conv3d(x, w.tensor, b.tensor, spatial_pad); }

  void collect(ParamRefs<S>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

// Transposed conv 4x4 / stride 2 / pad 1 (weight layout [Cin, Cout, 4, 4]).
template <typename S>
struct Deconv2dLayer {
  Parameter<S> w, b;

  Deconv2dLayer() = default;
  Deconv2dLayer(const std::string& prefix, int cin, int cout)
      : w(prefix + ".w", {cin, cout, 4, 4}, static_cast<std::int64_t>(cin) * 16,
          static_cast<std::int64_t>(cout) * 16, false),
        b(prefix + ".b", {cout}, static_cast<std::int64_t>(cin) * 16, cout, true) {}

  TensorT<S> forward(const TensorT<S>& x) const { return transposed_conv2d(x, w.tensor, b.tensor); }

  void collect(ParamRefs<S>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

// Fully connected y = W x + b for rank-1 x, composed from matmul.
template <typename S>
struct LinearLayer {
  Parameter<S> w, b;

  LinearLayer() = default;
  LinearLayer(const std::string& prefix, int in, int out)
      : w(prefix + ".w", {out, in}, in, out, false), b(prefix + ".b", {out}, in, out, true) {}

  TensorT<S> forward(const TensorT<S>& x) const {
    check(x.rank() == 1, "linear: input must be rank-1, got " + shape_str(x.shape()));
    TensorT<S> col = reshape(x, {x.extent(0), 1});
    TensorT<S> y = reshape(matmul(w.tensor, col), {w.tensor.extent(0)});
    return add(y, b.tensor);
  }

  void collect(ParamRefs<S>& out) {
    out.push_back(&w);
    out.push_back(&b);
  }
};

}  // namespace glnet
