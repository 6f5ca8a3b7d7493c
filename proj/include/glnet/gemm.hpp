#pragma once

// Row-major GEMM on raw buffers, backed by Eigen. All convolution and matmul
// kernels reduce to these three product forms. Column-split parallelism keeps
// results bitwise deterministic for a fixed thread count (each chunk writes a
// disjoint set of output columns).

#include <Eigen/Core>
#include <cstdint>

#include "glnet/parallel.hpp"

namespace glnet {

namespace detail {
template <typename S>
using EMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using EMap = Eigen::Map<EMat<S>>;
template <typename S>
using ECMap = Eigen::Map<const EMat<S>>;

inline constexpr std::int64_t kGemmGrain = 64;  // min columns per parallel chunk

template <typename S, typename Expr>
void gemm_store(S* c, std::int64_t m, std::int64_t n, const Expr& expr, bool accumulate) {
  EMap<S> C(c, m, n);
  if (accumulate) {
    C.noalias() += expr;
  } else {
    C.noalias() = expr;
  }
}
}  // namespace detail

// C[m,n] (+)= A[m,k] * B[k,n]
template <typename S>
void gemm_nn(const S* a, const S* b, S* c, std::int64_t m, std::int64_t k, std::int64_t n,
             bool accumulate = false) {
  detail::ECMap<S> A(a, m, k);
  if (ThreadPool::instance().threads() > 1 && n >= 2 * detail::kGemmGrain) {
    parallel_for(n, detail::kGemmGrain, [&](std::int64_t b0, std::int64_t b1) {
      detail::ECMap<S> Bc(b, k, n);
      detail::EMap<S> Cc(c, m, n);
      auto block = A * Bc.middleCols(b0, b1 - b0);
      if (accumulate) {
        Cc.middleCols(b0, b1 - b0).noalias() += block;
      } else {
        Cc.middleCols(b0, b1 - b0).noalias() = block;
      }
    });
    return;
  }
  detail::ECMap<S> B(b, k, n);
  detail::gemm_store(c, m, n, A * B, accumulate);
}

// C[m,n] (+)= A[k,m]^T * B[k,n]
template <typename S>
void gemm_tn(const S* a, const S* b, S* c, std::int64_t m, std::int64_t k, std::int64_t n,
             bool accumulate = false) {
  detail::ECMap<S> A(a, k, m);
  detail::ECMap<S> B(b, k, n);
  detail::gemm_store(c, m, n, A.transpose() * B, accumulate);
}

// C[m,n] (+)= A[m,k] * B[n,k]^T
template <typename S>
void gemm_nt(const S* a, const S* b, S* c, std::int64_t m, std::int64_t k, std::int64_t n,
             bool accumulate = false) {
  detail::ECMap<S> A(a, m, k);
  detail::ECMap<S> B(b, n, k);
  detail::gemm_store(c, m, n, A * B.transpose(), accumulate);
}

}  // namespace glnet
