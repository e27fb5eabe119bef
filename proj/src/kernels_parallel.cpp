// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

// OpenMP kernels. Work is split over independent output rows (or output
// channels for weight gradients); the per-element accumulation order matches
// kernels_serial.cpp exactly.

#include <omp.h>

#include <algorithm>
#include <vector>

#include "hazegen/error.hpp"
#include "hazegen/kernels.hpp"

namespace hazegen::kernels::parallel {

void conv3x3(std::span<const double> in, std::span<const double> weight,
             std::span<const double> bias, std::span<double> out, const ConvShape& s) {
  const int ci_n = s.in_channels;
  const int co_n = s.out_channels;
  // [ky][kx][in][out] copy so the innermost loop runs over output channels.
  std::vector<double> wt(weight.size());
  for (int co = 0; co < co_n; ++co)
    for (int k = 0; k < 9; ++k)
      for (int ci = 0; ci < ci_n; ++ci)
        wt[(static_cast<std::size_t>(k) * ci_n + ci) * co_n + co] =
            weight[(static_cast<std::size_t>(co) * 9 + k) * ci_n + ci];
#pragma omp parallel for schedule(static)
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      double* acc = &out[(static_cast<std::size_t>(y) * s.width + x) * co_n];
      std::fill(acc, acc + co_n, 0.0);
      for (int ky = 0; ky < 3; ++ky) {
        const int sy = y + ky - 1;
        if (sy < 0 || sy >= s.height) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int sx = x + kx - 1;
          if (sx < 0 || sx >= s.width) continue;
          const double* src = &in[(static_cast<std::size_t>(sy) * s.width + sx) * ci_n];
          const double* w = &wt[static_cast<std::size_t>(ky * 3 + kx) * ci_n * co_n];
          for (int ci = 0; ci < ci_n; ++ci) {
            const double v = src[ci];
            const double* wr = w + static_cast<std::size_t>(ci) * co_n;
            for (int co = 0; co < co_n; ++co) acc[co] += v * wr[co];
          }
        }
      }
      if (!bias.empty())
        for (int co = 0; co < co_n; ++co) acc[co] += bias[co];
    }
  }
}

void conv3x3_grad_input(std::span<const double> dout, std::span<const double> weight,
                        std::span<double> din, const ConvShape& s) {
  const int ci_n = s.in_channels;
  const int co_n = s.out_channels;
#pragma omp parallel for schedule(static)
  for (int p = 0; p < s.height; ++p) {
    for (int q = 0; q < s.width; ++q) {
      double* acc = &din[(static_cast<std::size_t>(p) * s.width + q) * ci_n];
      std::fill(acc, acc + ci_n, 0.0);
      for (int ky = 0; ky < 3; ++ky) {
        const int y = p - ky + 1;
        if (y < 0 || y >= s.height) continue;
        for (int kx = 0; kx < 3; ++kx) {
          const int x = q - kx + 1;
          if (x < 0 || x >= s.width) continue;
          const double* g = &dout[(static_cast<std::size_t>(y) * s.width + x) * co_n];
          for (int co = 0; co < co_n; ++co) {
            const double* w = &weight[((static_cast<std::size_t>(co) * 3 + ky) * 3 + kx) * ci_n];
            for (int ci = 0; ci < ci_n; ++ci) acc[ci] += g[co] * w[ci];
          }
        }
      }
    }
  }
}

void conv3x3_grad_weight(std::span<const double> in, std::span<const double> dout,
                         std::span<double> dweight, std::span<double> dbias,
                         const ConvShape& s) {
  const int ci_n = s.in_channels;
  const int co_n = s.out_channels;
#pragma omp parallel for schedule(static)
  for (int co = 0; co < co_n; ++co) {
    double* dw = &dweight[static_cast<std::size_t>(co) * 9 * ci_n];
    std::fill(dw, dw + 9 * ci_n, 0.0);
    double db = 0.0;
    for (int y = 0; y < s.height; ++y) {
      for (int x = 0; x < s.width; ++x) {
        const double g = dout[(static_cast<std::size_t>(y) * s.width + x) * co_n + co];
        db += g;
        for (int ky = 0; ky < 3; ++ky) {
          const int sy = y + ky - 1;
          if (sy < 0 || sy >= s.height) continue;
          for (int kx = 0; kx < 3; ++kx) {
            const int sx = x + kx - 1;
            if (sx < 0 || sx >= s.width) continue;
            const double* src = &in[(static_cast<std::size_t>(sy) * s.width + sx) * ci_n];
            double* w = dw + (ky * 3 + kx) * ci_n;
            for (int ci = 0; ci < ci_n; ++ci) w[ci] += g * src[ci];
          }
        }
      }
    }
    if (!dbias.empty()) dbias[co] = db;
  }
}

void matmul_nt(std::span<const double> x, std::span<const double> w,
               std::span<const double> bias, std::span<double> y, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (static_cast<long>(m) * k * n > 32768)
  for (int i = 0; i < m; ++i) {
    const double* xr = &x[static_cast<std::size_t>(i) * k];
    for (int j = 0; j < n; ++j) {
      const double* wr = &w[static_cast<std::size_t>(j) * k];
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += xr[t] * wr[t];
      if (!bias.empty()) acc += bias[j];
      y[static_cast<std::size_t>(i) * n + j] = acc;
    }
  }
}

void matmul_nn(std::span<const double> x, std::span<const double> w, std::span<double> y,
               int m, int k, int n) {
#pragma omp parallel for schedule(static) if (static_cast<long>(m) * k * n > 32768)
  for (int i = 0; i < m; ++i) {
    double* yr = &y[static_cast<std::size_t>(i) * n];
    std::fill(yr, yr + n, 0.0);
    for (int t = 0; t < k; ++t) {
      const double a = x[static_cast<std::size_t>(i) * k + t];
      const double* wr = &w[static_cast<std::size_t>(t) * n];
      for (int j = 0; j < n; ++j) yr[j] += a * wr[j];
    }
  }
}

void matmul_tn(std::span<const double> x, std::span<const double> z, std::span<double> y,
               int k, int m, int n) {
#pragma omp parallel for schedule(static) if (static_cast<long>(m) * k * n > 32768)
  for (int i = 0; i < m; ++i) {
    double* yr = &y[static_cast<std::size_t>(i) * n];
    std::fill(yr, yr + n, 0.0);
    for (int t = 0; t < k; ++t) {
      const double a = x[static_cast<std::size_t>(t) * m + i];
      const double* zr = &z[static_cast<std::size_t>(t) * n];
      for (int j = 0; j < n; ++j) yr[j] += a * zr[j];
    }
  }
}

void compose(const Image& clear, const Image& blend, const Image& light, const Image& noise,
             Image& out) {
  const int c_n = clear.channels();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < clear.height(); ++y) {
    for (int x = 0; x < clear.width(); ++x) {
      const double w = blend.at(y, x);
      for (int c = 0; c < c_n; ++c) {
        const double v = w * clear.at(y, x, c) + (1.0 - w) * light.at(y, x, c) + noise.at(y, x, c);
        out.at(y, x, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
}

void aggregate_tiles(std::span<const Image> predictions, std::span<const TileOrigin> origins,
                     Image& mean, Image& variance) {
  const int h = mean.height();
  const int w = mean.width();
  const int c_n = mean.channels();
  const int tiles = static_cast<int>(predictions.size());
  bool uncovered = false;

#pragma omp parallel for schedule(static) reduction(|| : uncovered)
  for (int row = 0; row < h; ++row) {
    std::vector<double> sum(static_cast<std::size_t>(w) * c_n, 0.0), gray_sum(w, 0.0), sq(w, 0.0);
    std::vector<int> count(w, 0);
    for (int t = 0; t < tiles; ++t) {
      const Image& p = predictions[t];
      const int y = row - origins[t].row;
      if (y < 0 || y >= p.height()) continue;
      for (int x = 0; x < p.width(); ++x) {
        const int col = origins[t].col + x;
        double g = 0.0;
        for (int c = 0; c < c_n; ++c) {
          sum[static_cast<std::size_t>(col) * c_n + c] += p.at(y, x, c);
          g += p.at(y, x, c);
        }
        gray_sum[col] += g / c_n;
        ++count[col];
      }
    }
    for (int t = 0; t < tiles; ++t) {
      const Image& p = predictions[t];
      const int y = row - origins[t].row;
      if (y < 0 || y >= p.height()) continue;
      for (int x = 0; x < p.width(); ++x) {
        const int col = origins[t].col + x;
        double g = 0.0;
        for (int c = 0; c < c_n; ++c) g += p.at(y, x, c);
        const double d = g / c_n - gray_sum[col] / count[col];
        sq[col] += d * d;
      }
    }
    for (int col = 0; col < w; ++col) {
      if (count[col] == 0) {
        uncovered = true;
        continue;
      }
      for (int c = 0; c < c_n; ++c)
        mean.at(row, col, c) = static_cast<float>(sum[static_cast<std::size_t>(col) * c_n + c] / count[col]);
      variance.at(row, col) = static_cast<float>(sq[col] / count[col]);
    }
  }
  if (uncovered) throw DataError("tile plan leaves a pixel uncovered");
}

}  // namespace hazegen::kernels::parallel
