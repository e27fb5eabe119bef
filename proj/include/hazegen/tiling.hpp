// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "hazegen/image.hpp"
#include "hazegen/kernels.hpp"

namespace hazegen::tiling {

/// Fixed-window image-to-image model, e.g. a pretrained dehazer that only
/// accepts 224x224 crops.
class Restorer {
 public:
  virtual ~Restorer() = default;
  virtual int window() const = 0;
  /// Input and output are window x window x 3, output in [0, 1].
  virtual Image restore(const Image& crop) = 0;
  /// False for restorers backed by a single external process.
  virtual bool thread_safe() const { return true; }
};

class IdentityRestorer final : public Restorer {
 public:
  explicit IdentityRestorer(int window) : window_(window) {}
  int window() const override { return window_; }
  Image restore(const Image& crop) override { return crop; }

 private:
  int window_;
};

class ConstantRestorer final : public Restorer {
 public:
  ConstantRestorer(int window, float value) : window_(window), value_(value) {}
  int window() const override { return window_; }
  Image restore(const Image& crop) override {
    return Image(crop.height(), crop.width(), crop.channels(), value_);
  }

 private:
  int window_;
  float value_;
};

/// Stretches each crop so its darkest and brightest values span [0, 1]. The
/// result depends on crop placement, which makes overlapping predictions
/// disagree near bright light sources.
class AutoLevelRestorer final : public Restorer {
 public:
  explicit AutoLevelRestorer(int window) : window_(window) {}
  int window() const override { return window_; }
  Image restore(const Image& crop) override;

 private:
  int window_;
};

/// Adapts a callable; used by tests.
class FunctionRestorer final : public Restorer {
 public:
  FunctionRestorer(int window, std::function<Image(const Image&)> fn)
      : window_(window), fn_(std::move(fn)) {}
  int window() const override { return window_; }
  Image restore(const Image& crop) override { return fn_(crop); }

 private:
  int window_;
  std::function<Image(const Image&)> fn_;
};

/// Resolves `toy:identity`, `toy:constant:<v>`, `toy:autolevel` or
/// `external:<path>`. Throws ConfigError for anything else.
std::unique_ptr<Restorer> make_restorer(const std::string& spec, int window);

struct TilePlan {
  int window = 224;
  int stride = 112;
  int height = 0;         // original image
  int width = 0;
  int padded_height = 0;  // >= window after reflect padding
  int padded_width = 0;
  std::vector<int> row_offsets;
  std::vector<int> col_offsets;
  std::vector<kernels::TileOrigin> tiles;  // row-major over the offsets
};

/// Offsets 0, stride, 2*stride, ... with the last one moved to dim - window so
/// the final tile is edge-aligned. Dimensions below the window are planned
/// against a reflect-padded image of exactly `window`.
TilePlan tile_plan(int height, int width, int window = 224, int stride = 112);

/// Mirror index into [0, n) without repeating the edge sample.
int reflect_index(int i, int n);

struct TiledResult {
  Image mean;      // H x W x C average of all covering predictions
  Image variance;  // H x W population variance of channel-mean predictions
};

TiledResult run_tiled(Restorer& restorer, const Image& image, const TilePlan& plan);

struct ConfidenceMap {
  Image values;  // one channel, values in (0, 1]
  bool operator==(const ConfidenceMap&) const = default;
};

inline constexpr double kDefaultConfidenceTau = 0.01;

/// m = exp(-variance / tau).
ConfidenceMap confidence_from_variance(const Image& variance, double tau = kDefaultConfidenceTau);

}  // namespace hazegen::tiling
