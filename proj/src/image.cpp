// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hazegen/image.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hazegen/error.hpp"

namespace hazegen {

Image::Image(int height, int width, int channels, float fill)
    : height_(height), width_(width), channels_(channels) {
  if (height <= 0 || width <= 0 || channels <= 0) {
    throw DataError("image dimensions must be positive");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Image resize_bilinear(const Image& src, int height, int width) {
  if (src.height() == height && src.width() == width) return src;
  Image dst(height, width, src.channels());
  const double sy = static_cast<double>(src.height()) / height;
  const double sx = static_cast<double>(src.width()) / width;
  for (int y = 0; y < height; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, static_cast<double>(src.height() - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, static_cast<double>(src.width() - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double top = (1 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c);
        const double bot = (1 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c);
        dst.at(y, x, c) = static_cast<float>((1 - wy) * top + wy * bot);
      }
    }
  }
  return dst;
}

void clamp_unit(Image& img) {
  for (float& v : img.data()) v = std::clamp(v, 0.0f, 1.0f);
}

bool all_within(const Image& img, float lo, float hi) {
  return std::all_of(img.data().begin(), img.data().end(), [&](float v) {
    return std::isfinite(v) && v >= lo && v <= hi;
  });
}

float min_value(const Image& img) {
  return *std::min_element(img.data().begin(), img.data().end());
}

float max_value(const Image& img) {
  return *std::max_element(img.data().begin(), img.data().end());
}

double mean_value(const Image& img) {
  double sum = 0.0;
  for (float v : img.data()) sum += v;
  return img.empty() ? 0.0 : sum / static_cast<double>(img.size());
}

Image channel_mean(const Image& img) {
  Image out(img.height(), img.width(), 1);
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double s = 0.0;
      for (int c = 0; c < img.channels(); ++c) s += img.at(y, x, c);
      out.at(y, x) = static_cast<float>(s / img.channels());
    }
  }
  return out;
}

}  // namespace hazegen
