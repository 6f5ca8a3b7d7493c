#pragma once

// Adam with decoupled weight decay (applied directly to the parameter,
// scaled by the learning rate, outside the adaptive moments) and the cosine
// learning-rate schedule.
//
// lr(t) for t in [0, T-1] interpolates lr_init -> lr_min along a half cosine
// with denominator T-1; both endpoints are returned exactly.

#include <cmath>
#include <cstdint>
#include <vector>

#include "glnet/nn.hpp"
#include "glnet/tensor.hpp"

namespace glnet {

inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_init,
                        double lr_min) {
  check(total_steps >= 1, "cosine_lr: total_steps must be >= 1");
  check(step >= 0 && step < total_steps, "cosine_lr: step out of range");
  check(lr_min <= lr_init, "cosine_lr: lr_min must be <= lr_init");
  if (step == 0 || total_steps == 1) return lr_init;
  if (step == total_steps - 1) return lr_min;
  const double phase = static_cast<double>(step) / static_cast<double>(total_steps - 1);
  return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + std::cos(M_PI * phase));
}

template <typename S>
class Adam {
 public:
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  explicit Adam(double wd = 0.0) : weight_decay(wd) {}

  // One update over the registry; gradients must already be populated.
  void step(const ParamRefs<S>& params, double lr) {
    if (m_.empty()) {
      for (Parameter<S>* p : params) {
        m_.emplace_back(static_cast<std::size_t>(p->tensor.size()), S(0));
        v_.emplace_back(static_cast<std::size_t>(p->tensor.size()), S(0));
      }
    }
    check(m_.size() == params.size(), "adam: registry size changed between steps");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      Parameter<S>* p = params[pi];
      S* w = p->tensor.data();
      const S* g = p->tensor.grad();
      check(g != nullptr, "adam: parameter " + p->name + " has no gradient buffer");
      S* m = m_[pi].data();
      S* v = v_[pi].data();
      const std::int64_t n = p->tensor.size();
      for (std::int64_t i = 0; i < n; ++i) {
        const double gi = static_cast<double>(g[i]);
        const double mi = beta1 * static_cast<double>(m[i]) + (1.0 - beta1) * gi;
        const double vi = beta2 * static_cast<double>(v[i]) + (1.0 - beta2) * gi * gi;
        m[i] = static_cast<S>(mi);
        v[i] = static_cast<S>(vi);
        const double mhat = mi / bc1;
        const double vhat = vi / bc2;
        const double update = mhat / (std::sqrt(vhat) + eps) +
                              weight_decay * static_cast<double>(w[i]);
        w[i] = static_cast<S>(static_cast<double>(w[i]) - lr * update);
      }
    }
  }

  std::int64_t iterations() const { return t_; }

 private:
  std::vector<std::vector<S>> m_, v_;
  std::int64_t t_ = 0;
};

}  // namespace glnet
