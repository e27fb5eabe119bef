// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hazegen/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>

#include "hazegen/error.hpp"
#include "hazegen/external_process.hpp"

namespace hazegen::tiling {
namespace {

std::vector<int> offsets(int dim, int window, int stride) {
  std::vector<int> out;
  for (int o = 0; o + window < dim; o += stride) out.push_back(o);
  if (out.empty() || out.back() != dim - window) out.push_back(dim - window);
  return out;
}

Image reflect_pad(const Image& img, int height, int width) {
  if (img.height() == height && img.width() == width) return img;
  Image out(height, width, img.channels());
  for (int y = 0; y < height; ++y) {
    const int sy = reflect_index(y, img.height());
    for (int x = 0; x < width; ++x) {
      const int sx = reflect_index(x, img.width());
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(sy, sx, c);
    }
  }
  return out;
}

Image crop(const Image& img, int top, int left, int height, int width) {
  Image out(height, width, img.channels());
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(y, x, c) = img.at(top + y, left + x, c);
  return out;
}

}  // namespace

Image AutoLevelRestorer::restore(const Image& crop) {
  const float lo = min_value(crop);
  const float hi = max_value(crop);
  Image out = crop;
  if (hi - lo < 1e-6f) return out;
  for (float& v : out.data()) v = (v - lo) / (hi - lo);
  clamp_unit(out);
  return out;
}

std::unique_ptr<Restorer> make_restorer(const std::string& spec, int window) {
  if (spec == "toy:identity") return std::make_unique<IdentityRestorer>(window);
  if (spec == "toy:autolevel") return std::make_unique<AutoLevelRestorer>(window);
  if (spec.rfind("toy:constant:", 0) == 0) {
    try {
      return std::make_unique<ConstantRestorer>(window, std::stof(spec.substr(13)));
    } catch (const std::exception&) {
      throw ConfigError("bad constant in restorer spec: " + spec);
    }
  }
  if (spec.rfind("external:", 0) == 0) {
    return std::make_unique<ExternalRestorer>(spec.substr(9), window);
  }
  throw ConfigError("unresolvable restorer spec: " + spec);
}

int reflect_index(int i, int n) {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

TilePlan tile_plan(int height, int width, int window, int stride) {
  if (window < 1 || stride < 1) throw ConfigError("tile window and stride must be >= 1");
  if (height < 1 || width < 1) throw DataError("tile_plan: empty image");
  TilePlan plan;
  plan.window = window;
  plan.stride = stride;
  plan.height = height;
  plan.width = width;
  plan.padded_height = std::max(height, window);
  plan.padded_width = std::max(width, window);
  plan.row_offsets = offsets(plan.padded_height, window, stride);
  plan.col_offsets = offsets(plan.padded_width, window, stride);
  for (int r : plan.row_offsets)
    for (int c : plan.col_offsets) plan.tiles.push_back({r, c});
  return plan;
}

TiledResult run_tiled(Restorer& restorer, const Image& image, const TilePlan& plan) {
  if (restorer.window() != plan.window)
    throw ConfigError("restorer window " + std::to_string(restorer.window()) +
                      " does not match tile plan window " + std::to_string(plan.window));
  if (image.height() != plan.height || image.width() != plan.width)
    throw DataError("run_tiled: image size does not match the tile plan");

  const Image padded = reflect_pad(image, plan.padded_height, plan.padded_width);
  const int n = static_cast<int>(plan.tiles.size());
  std::vector<Image> predictions(n);
  std::vector<std::exception_ptr> failures(n);

#pragma omp parallel for schedule(dynamic) if (restorer.thread_safe())
  for (int t = 0; t < n; ++t) {
    try {
      const auto [row, col] = plan.tiles[t];
      Image in = crop(padded, row, col, plan.window, plan.window);
      predictions[t] = restorer.restore(in);
      if (!predictions[t].same_shape(in))
        throw DataError("restorer returned a prediction of the wrong shape");
    } catch (...) {
      failures[t] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  Image mean(plan.padded_height, plan.padded_width, image.channels());
  Image variance(plan.padded_height, plan.padded_width, 1);
  kernels::aggregate_tiles(predictions, plan.tiles, mean, variance);

  TiledResult out;
  out.mean = crop(mean, 0, 0, plan.height, plan.width);
  out.variance = crop(variance, 0, 0, plan.height, plan.width);
  return out;
}

ConfidenceMap confidence_from_variance(const Image& variance, double tau) {
  if (!(tau > 0)) throw ConfigError("confidence tau must be positive");
  Image m(variance.height(), variance.width(), 1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double v = variance.data()[i];
    if (v < 0) throw DataError("variance must be non-negative");
    float c = static_cast<float>(std::exp(-v / tau));
    // Keep m strictly inside (0, 1) for any non-zero variance.
    if (v > 0 && c >= 1.0f) c = std::nextafter(1.0f, 0.0f);
    m.data()[i] = std::max(c, std::numeric_limits<float>::min());
  }
  return {std::move(m)};
}

}  // namespace hazegen::tiling
