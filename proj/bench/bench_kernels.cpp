// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference vs OpenMP kernels.

#include <benchmark/benchmark.h>

#include <vector>

#include "hazegen/kernels.hpp"
#include "hazegen/rng.hpp"
#include "hazegen/tiling.hpp"

namespace {

using namespace hazegen;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

Image random_image(int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  Image img(h, w, c);
  for (float& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

template <auto Fn>
void BM_conv3x3(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const kernels::ConvShape s{size, size, 32, 32};
  const auto in = random_vec(static_cast<std::size_t>(size) * size * 32, 1);
  const auto w = random_vec(32 * 9 * 32, 2);
  const auto b = random_vec(32, 3);
  std::vector<double> out(in.size());
  for (auto _ : state) {
    Fn(in, w, b, out, s);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * size * size);
}

template <auto Fn>
void BM_conv3x3_grad_input(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const kernels::ConvShape s{size, size, 32, 32};
  const auto dout = random_vec(static_cast<std::size_t>(size) * size * 32, 1);
  const auto w = random_vec(32 * 9 * 32, 2);
  std::vector<double> din(dout.size());
  for (auto _ : state) {
    Fn(dout, w, din, s);
    benchmark::DoNotOptimize(din.data());
  }
  state.SetItemsProcessed(state.iterations() * size * size);
}

template <auto Fn>
void BM_matmul_nt(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0)), k = 32, n = 32;
  const auto x = random_vec(static_cast<std::size_t>(m) * k, 1);
  const auto w = random_vec(static_cast<std::size_t>(n) * k, 2);
  std::vector<double> y(static_cast<std::size_t>(m) * n);
  for (auto _ : state) {
    Fn(x, w, {}, y, m, k, n);
    benchmark::DoNotOptimize(y.data());
  }
}

template <auto Fn>
void BM_compose(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const Image clear = random_image(size, size, 3, 1), blend = random_image(size, size, 1, 2);
  const Image light = random_image(size, size, 3, 3), noise = random_image(size, size, 3, 4);
  Image out(size, size, 3);
  for (auto _ : state) {
    Fn(clear, blend, light, noise, out);
    benchmark::DoNotOptimize(out.data().data());
  }
}

template <auto Fn>
void BM_aggregate_tiles(benchmark::State& state) {
  const int size = static_cast<int>(state.range(0));
  const tiling::TilePlan plan = tiling::tile_plan(size, size, 224, 112);
  std::vector<Image> preds;
  std::vector<kernels::TileOrigin> origins;
  for (int r : plan.row_offsets)
    for (int c : plan.col_offsets) {
      preds.push_back(random_image(224, 224, 3, preds.size()));
      origins.push_back({r, c});
    }
  Image mean(size, size, 3), var(size, size, 1);
  for (auto _ : state) {
    Fn(preds, origins, mean, var);
    benchmark::DoNotOptimize(mean.data().data());
  }
}

BENCHMARK(BM_conv3x3<kernels::serial::conv3x3>)->Arg(32)->Arg(128);
BENCHMARK(BM_conv3x3<kernels::parallel::conv3x3>)->Arg(32)->Arg(128);
BENCHMARK(BM_conv3x3_grad_input<kernels::serial::conv3x3_grad_input>)->Arg(32)->Arg(128);
BENCHMARK(BM_conv3x3_grad_input<kernels::parallel::conv3x3_grad_input>)->Arg(32)->Arg(128);
BENCHMARK(BM_matmul_nt<kernels::serial::matmul_nt>)->Arg(64)->Arg(4096);
BENCHMARK(BM_matmul_nt<kernels::parallel::matmul_nt>)->Arg(64)->Arg(4096);
BENCHMARK(BM_compose<kernels::serial::compose>)->Arg(512);
BENCHMARK(BM_compose<kernels::parallel::compose>)->Arg(512);
BENCHMARK(BM_aggregate_tiles<kernels::serial::aggregate_tiles>)->Arg(512);
BENCHMARK(BM_aggregate_tiles<kernels::parallel::aggregate_tiles>)->Arg(512);

}  // namespace

BENCHMARK_MAIN();
