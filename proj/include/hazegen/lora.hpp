// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "hazegen/rng.hpp"

namespace hazegen::model {

/// Low-rank update of one weight matrix: W + (alpha / rank) * B * A with
/// A: rank x in, B: out x rank. Only A and B are trainable.
struct LoraAdapter {
  int rank = 8;
  double alpha = 8.0;
  int out = 0;
  int in = 0;
  std::vector<float> a;
  std::vector<float> b;

  double scale() const { return alpha / rank; }
  std::size_t parameter_count() const { return a.size() + b.size(); }
};

/// One weight matrix of a backbone, stored row-major as out x in. Conv
/// kernels use in = 9 * in_channels with [ky][kx][channel] ordering.
struct WeightSite {
  std::string name;
  int out = 0;
  int in = 0;
  std::vector<float> weight;
  std::vector<float> bias;  // empty when the layer has none
  bool adaptable = false;   // eligible for a LoRA adapter
  std::optional<LoraAdapter> lora;

  /// Base weight plus the adapter delta, in double precision.
  std::vector<double> effective_weight() const;
  std::vector<double> bias_as_double() const;
};

class Denoiser;

/// Wraps every adaptable site with a zero-initialised adapter: B = 0 and
/// A ~ N(0, 1/rank). Throws ConfigError when rank > min(out, in) on any site.
void attach_lora(Denoiser& denoiser, int rank = 8, double alpha = 8.0, Rng* rng = nullptr);

/// Sum of A and B sizes over all attached adapters.
std::size_t lora_parameter_count(const Denoiser& denoiser);

/// Trainable parameters one adapter adds to an out x in matrix.
inline std::size_t lora_site_parameter_count(int rank, int out, int in) {
  return static_cast<std::size_t>(rank) * (static_cast<std::size_t>(out) + in);
}

/// Copy of every base weight and bias, for frozen-base checks.
std::vector<std::vector<float>> snapshot_base(const Denoiser& denoiser);

}  // namespace hazegen::model
