// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hazegen/augment.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "hazegen/error.hpp"
#include "hazegen/kernels.hpp"

namespace hazegen::augment {
namespace {

template <typename T>
void check_range(const Range<T>& r, const char* name) {
  if (!(r.lo <= r.hi)) throw ConfigError(std::string("empty range: ") + name);
}

}  // namespace

void AugmentConfig::validate() const {
  if (map_size < 1) throw ConfigError("map_size must be positive");
  if (region_size < 1 || region_size > map_size)
    throw ConfigError("region_size must lie in [1, map_size]");
  if (region_count < 0) throw ConfigError("region_count must be non-negative");
  check_range(base_weight_range, "base_weight_range");
  check_range(region_value_range, "region_value_range");
  check_range(light_region_count_range, "light_region_count_range");
  check_range(light_kernel_range, "light_kernel_range");
  check_range(light_amplitude_range, "light_amplitude_range");
  if (base_weight_range.lo < 0 || base_weight_range.hi > 1 || region_value_range.lo < 0 ||
      region_value_range.hi > 1)
    throw ConfigError("blend weights must lie in [0, 1]");
  if (light_region_count_range.lo < 0) throw ConfigError("light region count must be >= 0");
  if (light_kernel_range.lo < 1) throw ConfigError("light kernel size must be >= 1");
  if (noise_weight < 0) throw ConfigError("noise_weight must be >= 0");
}

AugmentConfig AugmentConfig::from_config(KeyValues& kv, const std::string& prefix) {
  AugmentConfig c;
  c.map_size = static_cast<int>(kv.get_int(prefix + "map_size", c.map_size));
  c.base_weight_range = kv.get_range(prefix + "base_weight_range", c.base_weight_range);
  c.region_count = static_cast<int>(kv.get_int(prefix + "region_count", c.region_count));
  c.region_size = static_cast<int>(kv.get_int(prefix + "region_size", c.region_size));
  c.region_value_range = kv.get_range(prefix + "region_value_range", c.region_value_range);
  c.light_region_count_range =
      kv.get_int_range(prefix + "light_region_count_range", c.light_region_count_range);
  c.light_kernel_range = kv.get_int_range(prefix + "light_kernel_range", c.light_kernel_range);
  c.light_amplitude_range =
      kv.get_range(prefix + "light_amplitude_range", c.light_amplitude_range);
  c.noise_weight = kv.get_double(prefix + "noise_weight", c.noise_weight);
  c.seed = static_cast<std::uint64_t>(kv.get_int(prefix + "seed", static_cast<std::int64_t>(c.seed)));
  c.validate();
  return c;
}

std::string AugmentConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "map_size = " << map_size << "\n"
     << "base_weight_range = " << format_range(base_weight_range) << "\n"
     << "region_count = " << region_count << "\n"
     << "region_size = " << region_size << "\n"
     << "region_value_range = " << format_range(region_value_range) << "\n"
     << "light_region_count_range = " << format_range(light_region_count_range) << "\n"
     << "light_kernel_range = " << format_range(light_kernel_range) << "\n"
     << "light_amplitude_range = " << format_range(light_amplitude_range) << "\n"
     << "noise_weight = " << noise_weight << "\n"
     << "seed = " << seed << "\n";
  return os.str();
}

BlendWeightMap make_blend_weight_map(const AugmentConfig& cfg, Rng& rng) {
  cfg.validate();
  const double base = rng.uniform(cfg.base_weight_range.lo, cfg.base_weight_range.hi);
  Image w(cfg.map_size, cfg.map_size, 1, static_cast<float>(base));
  // Regions may overlap; later draws overwrite earlier ones.
  for (int r = 0; r < cfg.region_count; ++r) {
    const auto top = static_cast<int>(rng.uniform_int(0, cfg.map_size - cfg.region_size));
    const auto left = static_cast<int>(rng.uniform_int(0, cfg.map_size - cfg.region_size));
    for (int y = top; y < top + cfg.region_size; ++y)
      for (int x = left; x < left + cfg.region_size; ++x)
        w.at(y, x) = static_cast<float>(
            rng.uniform(cfg.region_value_range.lo, cfg.region_value_range.hi));
  }
  return {std::move(w)};
}

double kernel_sigma(int kernel_size) {
  return 0.3 * ((kernel_size - 1) * 0.5 - 1.0) + 0.8;
}

Image make_light_map(const Image& base, int height, int width, const AugmentConfig& cfg,
                     Rng& rng) {
  cfg.validate();
  Image out = resize_bilinear(base, height, width);
  const auto blobs = rng.uniform_int(cfg.light_region_count_range.lo, cfg.light_region_count_range.hi);
  for (std::int64_t b = 0; b < blobs; ++b) {
    const auto cy = static_cast<int>(rng.uniform_int(0, height - 1));
    const auto cx = static_cast<int>(rng.uniform_int(0, width - 1));
    const int ksize = static_cast<int>(rng.uniform_int(cfg.light_kernel_range.lo, cfg.light_kernel_range.hi)) | 1;
    const double amplitude = rng.uniform(cfg.light_amplitude_range.lo, cfg.light_amplitude_range.hi);
    const double sigma = kernel_sigma(ksize);
    const double inv = 1.0 / (2.0 * sigma * sigma);
    const int half = ksize / 2;
    for (int y = std::max(0, cy - half); y <= std::min(height - 1, cy + half); ++y) {
      for (int x = std::max(0, cx - half); x <= std::min(width - 1, cx + half); ++x) {
        const double d2 = static_cast<double>((y - cy) * (y - cy) + (x - cx) * (x - cx));
        const double add = amplitude * std::exp(-d2 * inv);
        for (int c = 0; c < out.channels(); ++c)
          out.at(y, x, c) = static_cast<float>(out.at(y, x, c) + add);
      }
    }
  }
  clamp_unit(out);
  return out;
}

NoiseField sample_noise(int height, int width, int channels, const AugmentConfig& cfg, Rng& rng) {
  if (cfg.noise_weight < 0) throw ConfigError("noise_weight must be >= 0");
  const double sigma = 0.15 * cfg.noise_weight;
  const double cap = 0.3 * cfg.noise_weight;
  Image n(height, width, channels);
  for (float& v : n.data()) v = static_cast<float>(std::min(std::abs(rng.normal()) * sigma, cap));
  return {std::move(n)};
}

Image compose(const Image& clear, const BlendWeightMap& blend, const Image& light,
              const NoiseField& noise) {
  if (!clear.same_shape(light) || !clear.same_shape(noise.values) ||
      !clear.same_extent(blend.weights) || blend.weights.channels() != 1)
    throw DataError("compose: clear image, blend map, light map and noise must share a size");
  Image out(clear.height(), clear.width(), clear.channels());
  kernels::compose(clear, blend.weights, light, noise.values, out);
  return out;
}

double severity(const Image& clear, const BlendWeightMap& blend, const Image& augmented) {
  if (!clear.same_shape(augmented) || !clear.same_extent(blend.weights))
    throw DataError("severity: shape mismatch");
  double sum = 0.0;
  for (int y = 0; y < clear.height(); ++y)
    for (int x = 0; x < clear.width(); ++x) {
      const double w = blend.weights.at(y, x);
      for (int c = 0; c < clear.channels(); ++c)
        sum += w * clear.at(y, x, c) / (augmented.at(y, x, c) + kSeverityGuard);
    }
  return 1.0 - sum / static_cast<double>(clear.size());
}

AugmentResult augment(const Image& clear, std::span<const Image> light_pool,
                      const AugmentConfig& cfg, Rng& rng) {
  if (light_pool.empty()) throw DataError("augment: light map pool is empty");
  cfg.validate();
  AugmentResult r;
  r.light_index = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(light_pool.size()) - 1));
  BlendWeightMap full = make_blend_weight_map(cfg, rng);
  r.blend.weights = resize_bilinear(full.weights, clear.height(), clear.width());
  r.light = make_light_map(light_pool[r.light_index], clear.height(), clear.width(), cfg, rng);
  r.noise = sample_noise(clear.height(), clear.width(), clear.channels(), cfg, rng);
  r.image = compose(clear, r.blend, r.light, r.noise);
  r.severity = severity(clear, r.blend, r.image);
  return r;
}

}  // namespace hazegen::augment
