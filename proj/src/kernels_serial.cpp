// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference kernels. Keep the loop structure of each element's
// accumulation in sync with kernels_parallel.cpp.

#include <algorithm>
#include <vector>

#include "hazegen/error.hpp"
#include "hazegen/kernels.hpp"

namespace hazegen::kernels::serial {

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
  std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(m) * n, 0.0);
  for (int t = 0; t < k; ++t) {
    const double* zr = &z[static_cast<std::size_t>(t) * n];
    for (int i = 0; i < m; ++i) {
      const double a = x[static_cast<std::size_t>(t) * m + i];
      double* yr = &y[static_cast<std::size_t>(i) * n];
      for (int j = 0; j < n; ++j) yr[j] += a * zr[j];
    }
  }
}

void compose(const Image& clear, const Image& blend, const Image& light, const Image& noise,
             Image& out) {
  const int c_n = clear.channels();
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
  const std::size_t pixels = static_cast<std::size_t>(h) * w;
  std::vector<double> sum(pixels * c_n, 0.0), gray_sum(pixels, 0.0), sq(pixels, 0.0);
  std::vector<int> count(pixels, 0);

  for (std::size_t t = 0; t < predictions.size(); ++t) {
    const Image& p = predictions[t];
    for (int y = 0; y < p.height(); ++y) {
      for (int x = 0; x < p.width(); ++x) {
        const std::size_t idx = static_cast<std::size_t>(origins[t].row + y) * w + origins[t].col + x;
        double g = 0.0;
        for (int c = 0; c < c_n; ++c) {
          sum[idx * c_n + c] += p.at(y, x, c);
          g += p.at(y, x, c);
        }
        gray_sum[idx] += g / c_n;
        ++count[idx];
      }
    }
  }
  for (std::size_t t = 0; t < predictions.size(); ++t) {
    const Image& p = predictions[t];
    for (int y = 0; y < p.height(); ++y) {
      for (int x = 0; x < p.width(); ++x) {
        const std::size_t idx = static_cast<std::size_t>(origins[t].row + y) * w + origins[t].col + x;
        double g = 0.0;
        for (int c = 0; c < c_n; ++c) g += p.at(y, x, c);
        const double d = g / c_n - gray_sum[idx] / count[idx];
        sq[idx] += d * d;
      }
    }
  }
  for (std::size_t idx = 0; idx < pixels; ++idx) {
    if (count[idx] == 0) throw DataError("tile plan leaves a pixel uncovered");
    for (int c = 0; c < c_n; ++c)
      mean.data()[idx * c_n + c] = static_cast<float>(sum[idx * c_n + c] / count[idx]);
    variance.data()[idx] = static_cast<float>(sq[idx] / count[idx]);
  }
}

}  // namespace hazegen::kernels::serial
