// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "hazegen/config.hpp"
#include "hazegen/image.hpp"
#include "hazegen/rng.hpp"

namespace hazegen::augment {

/// Parameters of the severe degradation model. Defaults are the values used
/// for 512x512 training crops.
struct AugmentConfig {
  int map_size = 512;
  Range<double> base_weight_range{0.001, 0.1};
  int region_count = 8;
  int region_size = 128;
  Range<double> region_value_range{0.0, 0.04};
  Range<int> light_region_count_range{1, 10};
  Range<int> light_kernel_range{15, 160};
  Range<double> light_amplitude_range{0.2, 1.0};
  double noise_weight = 0.1;
  std::uint64_t seed = 0;

  /// Throws ConfigError on empty ranges or region_size > map_size.
  void validate() const;

  /// Reads `<prefix>key` entries, leaving unspecified fields at their defaults.
  static AugmentConfig from_config(KeyValues& kv, const std::string& prefix = "");
  std::string to_text() const;
};

/// Per-pixel mixing coefficient between the clear image and the light map.
struct BlendWeightMap {
  Image weights;  // one channel, values in [0, 1]
};

/// Additive non-negative noise, values in [0, 0.3 * noise_weight].
struct NoiseField {
  Image values;  // three channels
};

/// Guard added to the composed image before dividing in `severity`.
inline constexpr double kSeverityGuard = 1e-6;

BlendWeightMap make_blend_weight_map(const AugmentConfig& cfg, Rng& rng);

/// Brightens `base` (resized to height x width first) with additive Gaussian
/// blobs and clamps to [0, 1].
Image make_light_map(const Image& base, int height, int width, const AugmentConfig& cfg,
                     Rng& rng);

/// Gaussian kernel spread for an odd kernel size (OpenCV's convention).
double kernel_sigma(int kernel_size);

/// Half-normal noise with sigma = 0.15 * W_n, clamped to [0, 0.3 * W_n].
NoiseField sample_noise(int height, int width, int channels, const AugmentConfig& cfg, Rng& rng);

/// I = W_b * J + (1 - W_b) * L + eps, clamped to [0, 1].
Image compose(const Image& clear, const BlendWeightMap& blend, const Image& light,
              const NoiseField& noise);

/// S = 1 - mean(W_b * J / (I + delta)) over all pixels and channels.
double severity(const Image& clear, const BlendWeightMap& blend, const Image& augmented);

struct AugmentResult {
  Image image;
  double severity = 0.0;
  // Intermediates, kept so the severity can be recomputed independently.
  std::size_t light_index = 0;
  BlendWeightMap blend;
  Image light;
  NoiseField noise;
};

AugmentResult augment(const Image& clear, std::span<const Image> light_pool,
                      const AugmentConfig& cfg, Rng& rng);

}  // namespace hazegen::augment
