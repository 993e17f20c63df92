// Copyright 2026 The ShortFT Lab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace shortft::kernels {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using Map = Eigen::Map<RowMat>;

// C[m,n] (+)= op(A)[m,k] * op(B)[k,n]. A transposed is stored [k,m]; B transposed
// is stored [n,k]. All buffers row-major.
inline void gemm(const double* a, const double* b, double* c, std::size_t m,
                 std::size_t k, std::size_t n, bool trans_a, bool trans_b,
                 bool accumulate) {
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ki = static_cast<Eigen::Index>(k);
  const auto ni = static_cast<Eigen::Index>(n);
  Map out(c, mi, ni);
  ConstMap am(a, trans_a ? ki : mi, trans_a ? mi : ki);
  ConstMap bm(b, trans_b ? ni : ki, trans_b ? ki : ni);
  if (!accumulate) out.setZero();
  if (trans_a && trans_b) {
    out.noalias() += am.transpose() * bm.transpose();
  } else if (trans_a) {
    out.noalias() += am.transpose() * bm;
  } else if (trans_b) {
    out.noalias() += am * bm.transpose();
  } else {
    out.noalias() += am * bm;
  }
}

}  // namespace shortft::kernels
