#pragma once

// Finite-difference gradient verification.
//
// Every module is instantiated at double precision (the same templates the
// f32 model runs) on toy shapes. The harness reduces the module output to a
// scalar through a fixed random projection, records one backward pass, then
// compares sampled analytic gradient coordinates against central finite
// differences of the replayed forward. Relative error uses
//   |a - fd| / max(|a|, |fd|, 1e-5)
// so near-zero gradients are judged on an absolute 1e-5 scale: under the 1e-3
// relative tolerance that is |a - fd| < 1e-8, comfortably above the ~1e-9
// cancellation noise of the smallest step yet far below any real defect.
//
// Piecewise-linear ops (relu, channel/row max) make the loss nondifferentiable
// on a measure-zero set. When a sampled coordinate happens to push some
// pre-activation across such a boundary inside the FD window, the quotient
// disagrees with the (correct) one-sided analytic derivative. Those crossings
// are identified by re-evaluating the coordinate with a smaller step: a kink
// artifact shrinks with the window, while a genuine analytic-gradient error is
// step-invariant. Each coordinate therefore keeps the best agreement over a
// shrinking step ladder; implementation bugs still fail at every step size.
//
// `fault` biases every analytic gradient read by fault*(1+|g|); the CLI's
// hidden --inject-fault flag uses it to prove the harness can fail.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "glnet/model.hpp"
#include "glnet/rng.hpp"

namespace glnet {

struct GradCheckResult {
  std::string module;
  double max_rel = 0.0;
  int samples = 0;

  bool passed(double tol = 1e-3) const { return samples > 0 && max_rel < tol; }
};

namespace detail {

inline TensorT<double> probe(const TensorT<double>& y, const TensorT<double>& w) {
  return sum(mul(y, w));
}

inline TensorT<double> rand_input(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  TensorT<double> t = uniform_tensor<double>(rng, std::move(shape), lo, hi);
  t.set_requires_grad(true);
  return t;
}

inline TensorT<double> rand_weights(Rng& rng, const Shape& shape) {
  return uniform_tensor<double>(rng, shape, -1.0, 1.0);
}

template <typename LossFn>
GradCheckResult fd_check(const std::string& name, const ParamRefs<double>& params,
                         const std::vector<TensorT<double>*>& inputs, LossFn&& loss, Rng& rng,
                         int samples_per_tensor, double fault) {
  GradCheckResult result;
  result.module = name;
  struct Site {
    double* data;
    double* grad;
    std::int64_t numel;
  };
  std::vector<Site> sites;
  for (Parameter<double>* p : params) {
    p->tensor.zero_grad();
    sites.push_back({p->tensor.data(), p->tensor.grad(), p->tensor.size()});
  }
  for (TensorT<double>* t : inputs) {
    t->set_requires_grad(true);
    t->zero_grad();
    sites.push_back({t->data(), t->grad(), t->size()});
  }
  {
    TensorT<double> l = loss();
    backward(l);
  }
  for (const Site& site : sites) {
    const int ns = static_cast<int>(std::min<std::int64_t>(samples_per_tensor, site.numel));
    for (int s = 0; s < ns; ++s) {
      const std::int64_t idx =
          ns == site.numel ? s : static_cast<std::int64_t>(rng.uniform_int(site.numel));
      const double x0 = site.data[idx];
      const double analytic = site.grad[idx] + fault * (1.0 + std::abs(site.grad[idx]));
      double best = -1.0;
      for (const double scale : {1e-5, 1e-6, 1e-7}) {
        const double h = scale * std::max(1.0, std::abs(x0));
        double lp, lm;
        {
          NoGradGuard ng;
          site.data[idx] = x0 + h;
          lp = loss().item();
          site.data[idx] = x0 - h;
          lm = loss().item();
          site.data[idx] = x0;
        }
        const double fd = (lp - lm) / (2.0 * h);
        const double rel =
            std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-5});
        if (best < 0.0 || rel < best) best = rel;
        if (best < 1e-4) break;  // unambiguous agreement; smaller steps add nothing
      }
      result.max_rel = std::max(result.max_rel, best);
      ++result.samples;
    }
  }
  return result;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Per-module checks. Each builds its module at double precision with toy
// shapes, Glorot-initialized from the given RNG.
// ---------------------------------------------------------------------------
inline GradCheckResult gradcheck_conv2d(Rng& rng, int samples, double fault) {
  Conv2dLayer<double> layer("conv2d", 2, 3, 3, 1, 1);
  ParamRefs<double> params;
  layer.collect(params);
  glorot_init(params, rng);
  TensorT<double> x = detail::rand_input(rng, {2, 6, 6});
  TensorT<double> w = detail::rand_weights(rng, {3, 6, 6});
  auto loss = [&] { return detail::probe(layer.forward(x), w); };
  return detail::fd_check("conv2d", params, {&x}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_conv3d(Rng& rng, int samples, double fault) {
  Conv3dLayer<double> layer("conv3d", 2, 2, 2, 3, 3, 1);
  ParamRefs<double> params;
  layer.collect(params);
  glorot_init(params, rng);
  TensorT<double> x = detail::rand_input(rng, {2, 3, 5, 5});
  TensorT<double> w = detail::rand_weights(rng, {2, 2, 5, 5});
  auto loss = [&] { return detail::probe(layer.forward(x), w); };
  return detail::fd_check("conv3d", params, {&x}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_transposed_conv(Rng& rng, int samples, double fault) {
  Deconv2dLayer<double> layer("deconv", 3, 2);
  ParamRefs<double> params;
  layer.collect(params);
  glorot_init(params, rng);
  TensorT<double> x = detail::rand_input(rng, {3, 4, 4});
  TensorT<double> w = detail::rand_weights(rng, {2, 8, 8});
  auto loss = [&] { return detail::probe(layer.forward(x), w); };
  return detail::fd_check("transposed_conv", params, {&x}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_matmul(Rng& rng, int samples, double fault) {
  TensorT<double> a = detail::rand_input(rng, {3, 4});
  TensorT<double> b = detail::rand_input(rng, {4, 2});
  TensorT<double> w = detail::rand_weights(rng, {3, 2});
  auto loss = [&] { return detail::probe(matmul(a, b), w); };
  return detail::fd_check("matmul", {}, {&a, &b}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_softmax(Rng& rng, int samples, double fault) {
  TensorT<double> x = detail::rand_input(rng, {7}, -2.0, 2.0);
  TensorT<double> w = detail::rand_weights(rng, {7});
  auto loss = [&] { return detail::probe(softmax_vec(x), w); };
  return detail::fd_check("softmax", {}, {&x}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_rowmax(Rng& rng, int samples, double fault) {
  TensorT<double> x = detail::rand_input(rng, {4, 5});
  TensorT<double> w = detail::rand_weights(rng, {4});
  auto loss = [&] { return detail::probe(rowmax(x), w); };
  return detail::fd_check("rowmax", {}, {&x}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_channel_attention(Rng& rng, int samples, double fault) {
  ChannelAttention<double> ca("ca", 8, 4);
  ParamRefs<double> params;
  ca.collect(params);
  glorot_init(params, rng);
  TensorT<double> x = detail::rand_input(rng, {8, 5, 5});
  TensorT<double> w = detail::rand_weights(rng, {8, 5, 5});
  auto loss = [&] { return detail::probe(ca.forward(x), w); };
  return detail::fd_check("channel_attention", params, {&x}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_spatial_attention(Rng& rng, int samples, double fault) {
  SpatialAttention<double> sa("sa", 3);
  ParamRefs<double> params;
  sa.collect(params);
  glorot_init(params, rng);
  TensorT<double> x = detail::rand_input(rng, {4, 6, 6});
  TensorT<double> w = detail::rand_weights(rng, {4, 6, 6});
  auto loss = [&] { return detail::probe(sa.forward(x), w); };
  return detail::fd_check("spatial_attention", params, {&x}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_gcm(Rng& rng, int samples, double fault) {
  Gcm<double> gcm("gcm", 4, 3, 4, 3, false);
  ParamRefs<double> params;
  gcm.collect(params);
  glorot_init(params, rng);
  std::vector<TensorT<double>> feats;
  std::vector<TensorT<double>*> inputs;
  for (int i = 0; i < 3; ++i) feats.push_back(detail::rand_input(rng, {4, 6, 6}));
  for (auto& f : feats) inputs.push_back(&f);
  TensorT<double> w = detail::rand_weights(rng, {4, 6, 6});
  auto loss = [&] { return detail::probe(gcm.forward(stack_depth(feats)), w); };
  return detail::fd_check("gcm", params, inputs, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_pct(Rng& rng, int samples, double fault) {
  Pct<double> pct("pct", 4, 4, 3, false);
  ParamRefs<double> params;
  pct.collect(params);
  glorot_init(params, rng);
  TensorT<double> fk = detail::rand_input(rng, {4, 4, 4});
  TensorT<double> fj = detail::rand_input(rng, {4, 4, 4});
  TensorT<double> w = detail::rand_weights(rng, {4, 4, 4});
  auto loss = [&] { return detail::probe(pct.forward(fk, fj), w); };
  return detail::fd_check("pct", params, {&fk, &fj}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_lcm_fuse(Rng& rng, int samples, double fault) {
  LcmFuse<double> fuse("fuse", 4, 4);
  ParamRefs<double> params;
  fuse.collect(params);
  glorot_init(params, rng);
  std::vector<TensorT<double>> corr;
  std::vector<TensorT<double>*> inputs;
  for (int i = 0; i < 3; ++i) corr.push_back(detail::rand_input(rng, {4, 5, 5}));
  for (auto& c : corr) inputs.push_back(&c);
  TensorT<double> w = detail::rand_weights(rng, {4, 5, 5});
  auto loss = [&] { return detail::probe(fuse.forward(corr), w); };
  return detail::fd_check("lcm_fuse", params, inputs, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_gla(Rng& rng, int samples, double fault) {
  Gla<double> gla("gla", 4, 4, 3);
  ParamRefs<double> params;
  gla.collect(params);
  glorot_init(params, rng);
  TensorT<double> g = detail::rand_input(rng, {4, 6, 6});
  TensorT<double> p = detail::rand_input(rng, {4, 6, 6});
  TensorT<double> w = detail::rand_weights(rng, {4, 6, 6});
  auto loss = [&] { return detail::probe(gla.forward(g, p), w); };
  return detail::fd_check("gla", params, {&g, &p}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_aewf(Rng& rng, int samples, double fault) {
  Aewf<double> aewf("aewf", 8, 4);
  ParamRefs<double> params;
  aewf.collect(params);
  glorot_init(params, rng);
  TensorT<double> f_ia = detail::rand_input(rng, {8, 5, 5});
  TensorT<double> f_ie = detail::rand_input(rng, {8, 5, 5});
  TensorT<double> w = detail::rand_weights(rng, {8, 5, 5});
  auto loss = [&] { return detail::probe(aewf.forward(f_ia, f_ie), w); };
  return detail::fd_check("aewf", params, {&f_ia, &f_ie}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_decoder(Rng& rng, int samples, double fault) {
  Decoder<double> dec("decoder", 8, 2);
  ParamRefs<double> params;
  dec.collect(params);
  glorot_init(params, rng);
  TensorT<double> x = detail::rand_input(rng, {8, 4, 4});
  TensorT<double> w = detail::rand_weights(rng, {1, 16, 16});
  auto loss = [&] { return detail::probe(dec.forward(x), w); };
  return detail::fd_check("decoder", params, {&x}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_backbone(Rng& rng, int samples, double fault) {
  Backbone<double> bb("backbone", 8, 4, 16);
  ParamRefs<double> params;
  bb.collect(params);
  glorot_init(params, rng);
  TensorT<double> x = detail::rand_input(rng, {3, 16, 16}, 0.0, 1.0);
  TensorT<double> w = detail::rand_weights(rng, {8, 4, 4});
  auto loss = [&] { return detail::probe(bb.forward(x), w); };
  return detail::fd_check("backbone", params, {&x}, loss, rng, samples, fault);
}

inline GradCheckResult gradcheck_full_model(Rng& rng, int samples, double fault) {
  ModelConfig cfg;
  cfg.group_size = 3;
  cfg.input_side = 16;
  cfg.channels = 8;
  cfg.stride = 4;
  cfg.ca_ratio = 4;
  cfg.sa_kernel = 3;
  GLNetT<double> model(cfg);
  model.init_parameters(rng.fork().uniform_int(1u << 30));
  std::vector<TensorT<double>> images;
  std::vector<TensorT<double>*> inputs;
  for (int i = 0; i < cfg.group_size; ++i)
    images.push_back(detail::rand_input(rng, {3, 16, 16}, 0.0, 1.0));
  for (auto& im : images) inputs.push_back(&im);
  std::vector<TensorT<double>> gts;
  for (int i = 0; i < cfg.group_size; ++i) {
    TensorT<double> t = TensorT<double>::zeros({1, 16, 16});
    double* p = t.data();
    for (std::int64_t j = 0; j < t.size(); ++j) p[j] = rng.bernoulli(0.5) ? 1.0 : 0.0;
    gts.push_back(t);
  }
  auto loss = [&] { return bce_group_loss(model.forward_group(images), gts); };
  return detail::fd_check("full_model", model.params(), inputs, loss, rng, samples, fault);
}

// Runs every module check; `fault` != 0 biases analytic gradients so the
// suite must report failures (used to verify the harness itself).
inline std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed, double fault = 0.0,
                                                        int samples = 6) {
  Rng master(seed);
  std::vector<GradCheckResult> results;
  auto run = [&](auto&& fn, int n) {
    Rng rng = master.fork();
    results.push_back(fn(rng, n, fault));
  };
  run([](Rng& r, int n, double f) { return gradcheck_conv2d(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_conv3d(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_transposed_conv(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_matmul(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_softmax(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_rowmax(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_channel_attention(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_spatial_attention(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_gcm(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_pct(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_lcm_fuse(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_gla(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_aewf(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_decoder(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_backbone(r, n, f); }, samples);
  run([](Rng& r, int n, double f) { return gradcheck_full_model(r, n, f); },
      std::min(samples, 3));
  return results;
}

}  // namespace glnet
