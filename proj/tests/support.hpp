// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

// Synthetic fixtures shared by the unit and acceptance tests.

#pragma once

#include <cmath>
#include <vector>

#include "hazegen/augment.hpp"
#include "hazegen/dataset.hpp"
#include "hazegen/image.hpp"
#include "hazegen/rng.hpp"
#include "hazegen/tiling.hpp"

namespace hazegen::testing {

// Smooth gradient plus a few flat rectangles.
inline Image synthetic_clear(int h, int w, Rng& rng) {
  Image img(h, w, 3);
  double base[3], gy[3], gx[3];
  for (int c = 0; c < 3; ++c) {
    base[c] = rng.uniform(0.1, 0.5);
    gy[c] = rng.uniform(-0.3, 0.3);
    gx[c] = rng.uniform(-0.3, 0.3);
  }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = static_cast<float>(base[c] + gy[c] * y / h + gx[c] * x / w);
  const int rects = static_cast<int>(rng.uniform_int(2, 4));
  for (int r = 0; r < rects; ++r) {
    const int y0 = static_cast<int>(rng.uniform_int(0, h - 2)), x0 = static_cast<int>(rng.uniform_int(0, w - 2));
    const int y1 = std::min(h, y0 + static_cast<int>(rng.uniform_int(2, std::max(2, h / 3))));
    const int x1 = std::min(w, x0 + static_cast<int>(rng.uniform_int(2, std::max(2, w / 3))));
    const float v[3] = {static_cast<float>(rng.uniform()), static_cast<float>(rng.uniform()),
                        static_cast<float>(rng.uniform())};
    for (int y = y0; y < y1; ++y)
      for (int x = x0; x < x1; ++x)
        for (int c = 0; c < 3; ++c) img.at(y, x, c) = v[c];
  }
  clamp_unit(img);
  return img;
}

// Clear image seen through uniform haze with a warm glow around one source.
inline Image synthetic_haze(int h, int w, Rng& rng) {
  Image img = synthetic_clear(h, w, rng);
  const double t = rng.uniform(0.4, 0.7);
  const double cy = rng.uniform(0, h), cx = rng.uniform(0, w), r = rng.uniform(0.2, 0.5) * std::max(h, w);
  const double glow[3] = {1.0, 0.8, 0.5};
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d2 = ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (r * r);
      const double g = 0.6 * std::exp(-d2);
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = static_cast<float>(img.at(y, x, c) * t + (1 - t) * 0.35 + g * glow[c]);
    }
  clamp_unit(img);
  return img;
}

// Light image with mean >= 0.5: bright floor plus a few hot spots.
inline Image bright_light(int h, int w, Rng& rng) {
  Image img(h, w, 3);
  const double floor = rng.uniform(0.55, 0.7);
  const double cy = rng.uniform(0, h), cx = rng.uniform(0, w), r = 0.3 * std::max(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d2 = ((y - cy) * (y - cy) + (x - cx) * (x - cx)) / (r * r);
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = static_cast<float>(floor + 0.4 * std::exp(-d2));
    }
  clamp_unit(img);
  return img;
}

struct DeskData {
  data::Dataset id, de, bs;
};

// Balanced desk-scale dataset: `n` hazy inputs give n ID and n DE pairs, and
// `n` clear images give n BS pairs.
inline DeskData desk_dataset(int n, int size, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Image> haze, clear, lights;
  for (int i = 0; i < n; ++i) haze.push_back(synthetic_haze(size, size, rng));
  for (int i = 0; i < n; ++i) clear.push_back(synthetic_clear(size, size, rng));
  for (int i = 0; i < 3; ++i) lights.push_back(bright_light(size, size, rng));
  tiling::AutoLevelRestorer restorer(size / 2);
  data::TileSettings tiles{size / 2, size / 4, tiling::kDefaultConfidenceTau};
  DeskData d;
  d.id = data::build_id_pairs(haze, restorer, tiles);
  data::UnsharpEnhancer enhancer;
  d.de = data::build_de_pairs(d.id, enhancer);
  augment::AugmentConfig cfg;
  d.bs = data::build_bs_pairs(clear, lights, cfg, rng);
  return d;
}

}  // namespace hazegen::testing
