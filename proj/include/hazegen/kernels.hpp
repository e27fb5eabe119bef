// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>

#include "hazegen/image.hpp"

// Data-parallel kernels. Each kernel exists twice: a plain serial reference
// in `serial` and an OpenMP version in `parallel`. Both accumulate every
// output element in the same order, so their results are bit-identical; the
// unit tests and the benchmark rely on that.
//
// Tensors are dense, row-major and channels-last. Convolutions are 3x3 with
// zero padding and weights laid out as [out][ky][kx][in].

namespace hazegen::kernels {

struct ConvShape {
  int height;
  int width;
  int in_channels;
  int out_channels;
};

struct TileOrigin {
  int row;
  int col;
};

#define HAZEGEN_KERNEL_DECLS                                                     \
  void conv3x3(std::span<const double> in, std::span<const double> weight,      \
               std::span<const double> bias, std::span<double> out,              \
               const ConvShape& s);                                              \
  void conv3x3_grad_input(std::span<const double> dout,                          \
                          std::span<const double> weight,                        \
                          std::span<double> din, const ConvShape& s);            \
  void conv3x3_grad_weight(std::span<const double> in,                           \
                           std::span<const double> dout,                         \
                           std::span<double> dweight, std::span<double> dbias,   \
                           const ConvShape& s);                                  \
  /* y[m,n] = sum_k x[m,k] * w[n,k] + b[n] */                                     \
  void matmul_nt(std::span<const double> x, std::span<const double> w,          \
                 std::span<const double> bias, std::span<double> y, int m,       \
                 int k, int n);                                                  \
  /* y[m,n] = sum_k x[m,k] * w[k,n] */                                            \
  void matmul_nn(std::span<const double> x, std::span<const double> w,          \
                 std::span<double> y, int m, int k, int n);                      \
  /* y[m,n] = sum_k x[k,m] * z[k,n] */                                            \
  void matmul_tn(std::span<const double> x, std::span<const double> z,          \
                 std::span<double> y, int k, int m, int n);                      \
  void compose(const Image& clear, const Image& blend, const Image& light,      \
               const Image& noise, Image& out);                                  \
  void aggregate_tiles(std::span<const Image> predictions,                       \
                       std::span<const TileOrigin> origins, Image& mean,         \
                       Image& variance);

namespace serial {
HAZEGEN_KERNEL_DECLS
}  // namespace serial

namespace parallel {
HAZEGEN_KERNEL_DECLS
}  // namespace parallel

#undef HAZEGEN_KERNEL_DECLS

// The library calls the OpenMP versions.
using namespace parallel;

}  // namespace hazegen::kernels
