// Core tensor + reverse-mode autodiff engine tests: construction contracts,
// graph recording, gradient accumulation, fan-out graphs, and error paths.

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "glnet/glnet.hpp"

namespace {

using glnet::NoGradGuard;
using glnet::Rng;
using glnet::Shape;
using glnet::Tensor;
using glnet::TensorT;

TEST(TensorCore, ConstructionAndShape) {
  Tensor t = Tensor::zeros({2, 3, 4});
  EXPECT_TRUE(t.defined());
  EXPECT_EQ(t.rank(), 3);
  EXPECT_EQ(t.size(), 24);
  EXPECT_EQ(t.extent(0), 2);
  EXPECT_EQ(t.extent(1), 3);
  EXPECT_EQ(t.extent(2), 4);
  for (std::int64_t i = 0; i < t.size(); ++i) EXPECT_EQ(t.data()[i], 0.0f);

  Tensor f = Tensor::full({2, 2}, 1.5f);
  for (std::int64_t i = 0; i < f.size(); ++i) EXPECT_EQ(f.data()[i], 1.5f);

  Tensor v = Tensor::from({2, 2}, {1.f, 2.f, 3.f, 4.f});
  EXPECT_EQ(v.data()[3], 4.0f);
}

TEST(TensorCore, ShapeValidation) {
  EXPECT_THROW(Tensor::zeros({}), glnet::ShapeError);
  EXPECT_THROW(Tensor::zeros({1, 1, 1, 1, 1, 1}), glnet::ShapeError);
  EXPECT_THROW(Tensor::zeros({2, 0, 3}), glnet::ShapeError);
  EXPECT_THROW(Tensor::zeros({-1}), glnet::ShapeError);
  EXPECT_THROW(Tensor::from({3}, {1.f, 2.f}), glnet::ShapeError);
}

TEST(TensorCore, ItemRequiresScalar) {
  Tensor s = Tensor::from({1}, {7.f});
  EXPECT_EQ(s.item(), 7.0f);
  Tensor t = Tensor::zeros({2});
  EXPECT_THROW(t.item(), glnet::ShapeError);
}

TEST(TensorCore, CopyAliasesDetachCopies) {
  Tensor a = Tensor::from({2}, {1.f, 2.f});
  Tensor alias = a;  // shares the buffer
  alias.data()[0] = 9.f;
  EXPECT_EQ(a.data()[0], 9.0f);

  Tensor copy = a.detach_copy();
  copy.data()[0] = 5.f;
  EXPECT_EQ(a.data()[0], 9.0f);
  EXPECT_FALSE(copy.requires_grad());
}

TEST(TensorCore, CastRoundTrip) {
  Tensor a = Tensor::from({3}, {0.25f, -1.f, 3.f});
  TensorT<double> d = glnet::cast_tensor<double>(a);
  Tensor back = glnet::cast_tensor<float>(d);
  for (std::int64_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.data()[i], back.data()[i]);
}

TEST(TensorCore, GradBufferLifecycle) {
  Tensor t = Tensor::zeros({4});
  EXPECT_EQ(t.grad(), nullptr);
  t.set_requires_grad(true);
  ASSERT_NE(t.grad(), nullptr);
  t.grad()[2] = 3.f;
  t.zero_grad();
  EXPECT_EQ(t.grad()[2], 0.0f);
}

// loss = sum(x*x) has gradient 2x.
TEST(Autodiff, SquareLossClosedForm) {
  Tensor x = Tensor::from({4}, {1.f, -2.f, 0.5f, 3.f});
  x.set_requires_grad(true);
  Tensor loss = glnet::sum(glnet::mul(x, x));
  glnet::backward(loss);
  for (std::int64_t i = 0; i < x.size(); ++i) {
    EXPECT_FLOAT_EQ(x.grad()[i], 2.0f * x.data()[i]);
  }
}

TEST(Autodiff, UnusedLeafKeepsZeroGradient) {
  Tensor x = Tensor::from({2}, {1.f, 2.f});
  Tensor unused = Tensor::from({2}, {5.f, 6.f});
  x.set_requires_grad(true);
  unused.set_requires_grad(true);
  Tensor loss = glnet::sum(x);
  glnet::backward(loss);
  EXPECT_EQ(unused.grad()[0], 0.0f);
  EXPECT_EQ(unused.grad()[1], 0.0f);
}

// Fresh forward passes accumulate into leaf gradients until zero_grad.
TEST(Autodiff, GradientsAccumulateAcrossSteps) {
  Tensor x = Tensor::from({3}, {1.f, 2.f, 3.f});
  x.set_requires_grad(true);
  for (int pass = 0; pass < 2; ++pass) {
    Tensor loss = glnet::sum(glnet::mul(x, x));
    glnet::backward(loss);
  }
  for (std::int64_t i = 0; i < x.size(); ++i) {
    EXPECT_FLOAT_EQ(x.grad()[i], 4.0f * x.data()[i]);
  }
  x.zero_grad();
  Tensor loss = glnet::sum(glnet::mul(x, x));
  glnet::backward(loss);
  for (std::int64_t i = 0; i < x.size(); ++i) {
    EXPECT_FLOAT_EQ(x.grad()[i], 2.0f * x.data()[i]);
  }
}

// Re-running backward over the same recorded graph must behave like another
// unit-seeded pass: leaf grads double, with no compounding through
// intermediate buffers.
TEST(Autodiff, RepeatedBackwardOnSameGraph) {
  Tensor x = Tensor::from({2}, {3.f, -1.f});
  x.set_requires_grad(true);
  Tensor y = glnet::mul(x, x);
  Tensor z = glnet::scale(y, 2.0);
  Tensor loss = glnet::sum(z);  // d/dx = 4x
  glnet::backward(loss);
  glnet::backward(loss);
  for (std::int64_t i = 0; i < x.size(); ++i) {
    EXPECT_FLOAT_EQ(x.grad()[i], 8.0f * x.data()[i]);
  }
}

// Diamond graph: u = x*x feeds two consumers whose results are added.
// dL/dx = 2x(a+b), dL/da = dL/db = x².
TEST(Autodiff, DiamondFanOutClosedForm) {
  Tensor x = Tensor::from({3}, {1.f, -2.f, 0.25f});
  Tensor a = Tensor::from({3}, {2.f, 3.f, -1.f});
  Tensor b = Tensor::from({3}, {0.5f, -1.f, 4.f});
  x.set_requires_grad(true);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  Tensor u = glnet::mul(x, x);
  Tensor loss = glnet::sum(glnet::add(glnet::mul(u, a), glnet::mul(u, b)));
  glnet::backward(loss);
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const float xi = x.data()[i];
    EXPECT_FLOAT_EQ(x.grad()[i], 2.0f * xi * (a.data()[i] + b.data()[i]));
    EXPECT_FLOAT_EQ(a.grad()[i], xi * xi);
    EXPECT_FLOAT_EQ(b.grad()[i], xi * xi);
  }
}

// The same tensor passed twice to one op accumulates both slots' gradients.
TEST(Autodiff, DuplicateInputAccumulates) {
  Tensor x = Tensor::from({1, 2, 2}, {1.f, 2.f, 3.f, 4.f});
  x.set_requires_grad(true);
  Tensor cat = glnet::concat_channels(std::vector<Tensor>{x, x});
  EXPECT_EQ(cat.extent(0), 2);
  Tensor loss = glnet::sum(cat);
  glnet::backward(loss);
  for (std::int64_t i = 0; i < x.size(); ++i) EXPECT_FLOAT_EQ(x.grad()[i], 2.0f);
}

// A leaf consumed by several independently recorded ops (the shared-backbone
// pattern: one parameter, several images).
TEST(Autodiff, SharedLeafAcrossBranches) {
  Tensor w = Tensor::from({2}, {1.5f, -0.5f});
  Tensor x1 = Tensor::from({2}, {1.f, 2.f});
  Tensor x2 = Tensor::from({2}, {3.f, 4.f});
  w.set_requires_grad(true);
  Tensor loss = glnet::sum(glnet::add(glnet::mul(w, x1), glnet::mul(w, x2)));
  glnet::backward(loss);
  for (std::int64_t i = 0; i < w.size(); ++i) {
    EXPECT_FLOAT_EQ(w.grad()[i], x1.data()[i] + x2.data()[i]);
  }
}

TEST(Autodiff, DeepChainTopologicalOrder) {
  // x -> 20 chained scale ops; gradient is the product of the factors.
  Tensor x = Tensor::from({2}, {1.f, -1.f});
  x.set_requires_grad(true);
  Tensor y = x;
  for (int i = 0; i < 20; ++i) y = glnet::scale(y, 1.1);
  Tensor loss = glnet::sum(y);
  glnet::backward(loss);
  const float expect = static_cast<float>(std::pow(1.1, 20));
  EXPECT_NEAR(x.grad()[0], expect, 1e-4f);
  EXPECT_NEAR(x.grad()[1], expect, 1e-4f);
}

TEST(Autodiff, BackwardErrors) {
  Tensor x = Tensor::from({2}, {1.f, 2.f});
  x.set_requires_grad(true);
  Tensor vec = glnet::mul(x, x);
  EXPECT_THROW(glnet::backward(vec), glnet::ShapeError);  // non-scalar

  Tensor plain = Tensor::from({1}, {3.f});
  EXPECT_THROW(glnet::backward(plain), glnet::ShapeError);  // nothing recorded

  Tensor undef;
  EXPECT_THROW(glnet::backward(undef), glnet::ShapeError);
}

TEST(Autodiff, NoGradGuardSuppressesRecording) {
  Tensor x = Tensor::from({2}, {1.f, 2.f});
  x.set_requires_grad(true);
  EXPECT_TRUE(glnet::grad_enabled());
  {
    NoGradGuard ng;
    EXPECT_FALSE(glnet::grad_enabled());
    {
      NoGradGuard nested;
      EXPECT_FALSE(glnet::grad_enabled());
    }
    EXPECT_FALSE(glnet::grad_enabled());
    Tensor y = glnet::sum(glnet::mul(x, x));
    EXPECT_FALSE(y.requires_grad());
    EXPECT_THROW(glnet::backward(y), glnet::ShapeError);
  }
  EXPECT_TRUE(glnet::grad_enabled());
}

TEST(Autodiff, NonFiniteForwardIsNumericError) {
  Tensor x = Tensor::full({4}, 1e30f);
  EXPECT_THROW(glnet::mul(x, x), glnet::NumericError);  // overflows to inf
}

TEST(Broadcast, AddAndMulShapes) {
  Tensor x = Tensor::from({2, 2, 2}, {1.f, 2.f, 3.f, 4.f, 5.f, 6.f, 7.f, 8.f});
  Tensor plane = Tensor::from({1, 2, 2}, {10.f, 20.f, 30.f, 40.f});
  Tensor out = glnet::add(x, plane);
  EXPECT_EQ(out.shape(), (Shape{2, 2, 2}));
  EXPECT_FLOAT_EQ(out.data()[0], 11.f);
  EXPECT_FLOAT_EQ(out.data()[4], 15.f);  // second channel re-uses the plane

  Tensor gate = Tensor::from({2, 1, 1}, {2.f, 3.f});
  Tensor scaled = glnet::mul(x, gate);
  EXPECT_FLOAT_EQ(scaled.data()[0], 2.f);
  EXPECT_FLOAT_EQ(scaled.data()[3], 8.f);
  EXPECT_FLOAT_EQ(scaled.data()[4], 15.f);
  EXPECT_FLOAT_EQ(scaled.data()[7], 24.f);

  Tensor bad = Tensor::zeros({3, 2, 2});
  EXPECT_THROW(glnet::add(x, bad), glnet::ShapeError);
}

TEST(Broadcast, GradientsFlowThroughBroadcast) {
  Tensor x = Tensor::from({2, 1, 2}, {1.f, 2.f, 3.f, 4.f});
  Tensor g = Tensor::from({1, 1, 2}, {5.f, 7.f});
  x.set_requires_grad(true);
  g.set_requires_grad(true);
  Tensor loss = glnet::sum(glnet::mul(x, g));
  glnet::backward(loss);
  // d/dx = g broadcast; d/dg sums over the broadcast axis.
  EXPECT_FLOAT_EQ(x.grad()[0], 5.f);
  EXPECT_FLOAT_EQ(x.grad()[1], 7.f);
  EXPECT_FLOAT_EQ(x.grad()[2], 5.f);
  EXPECT_FLOAT_EQ(x.grad()[3], 7.f);
  EXPECT_FLOAT_EQ(g.grad()[0], 1.f + 3.f);
  EXPECT_FLOAT_EQ(g.grad()[1], 2.f + 4.f);
}

// Double-precision finite differences over a graph that reuses one conv layer
// on two inputs (regression for fan-in over shared parameters).
TEST(Autodiff, SharedConvLayerFiniteDifferences) {
  Rng rng(42);
  glnet::Conv2dLayer<double> layer("shared", 2, 2, 3, 1, 1);
  glnet::ParamRefs<double> params;
  layer.collect(params);
  glnet::glorot_init(params, rng);
  TensorT<double> x1 = glnet::detail::rand_input(rng, {2, 5, 5});
  TensorT<double> x2 = glnet::detail::rand_input(rng, {2, 5, 5});
  auto loss = [&] {
    return glnet::add(glnet::sum(layer.forward(x1)),
                      glnet::scale(glnet::sum(layer.forward(x2)), 0.5));
  };
  auto res = glnet::detail::fd_check("shared_conv", params, {&x1, &x2}, loss, rng, 6, 0.0);
  EXPECT_TRUE(res.passed());
  EXPECT_LT(res.max_rel, 1e-3);
}

}  // namespace
