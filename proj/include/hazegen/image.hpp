// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hazegen {

/// Channels-last float raster. Three channels for colour images, one for
/// scalar maps (blend weights, confidence, variance, generative level).
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, float fill = 0.0f);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  float& at(int y, int x, int c = 0) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  float at(int y, int x, int c = 0) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }

  bool same_shape(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  bool same_extent(const Image& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  bool operator==(const Image& other) const = default;

 private:
  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<float> data_;
};

/// Bilinear resampling with half-pixel centres and edge clamping.
Image resize_bilinear(const Image& src, int height, int width);

/// Clamp every value into [0, 1] in place.
void clamp_unit(Image& img);

/// True when every value is finite and within [lo, hi].
bool all_within(const Image& img, float lo, float hi);

float min_value(const Image& img);
float max_value(const Image& img);
double mean_value(const Image& img);

/// Per-pixel channel mean as a single-channel image.
Image channel_mean(const Image& img);

}  // namespace hazegen
