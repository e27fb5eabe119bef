// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hazegen/backbone.hpp"
#include "hazegen/config.hpp"
#include "hazegen/dataset.hpp"
#include "hazegen/diffusion.hpp"
#include "hazegen/image.hpp"

namespace hazegen::levelmap {

using model::Matrix;

struct SamplerConfig {
  int num_steps = 50;
  std::uint64_t seed = 0;
  // Clamp the predicted clean latent to [0, 1] at every step.
  bool clip_denoised = true;
  // Sampling-step indices (0 = first, noisiest step) whose attention feeds the
  // map. Empty means every step.
  std::vector<int> capture_steps;

  void validate(const diffusion::NoiseSchedule& schedule) const;
  static SamplerConfig from_config(KeyValues& kv, const std::string& prefix = "");
  std::string to_text() const;
};

/// Evenly spaced timesteps 1 + k * (T / n), returned in descending order.
std::vector<int> sampling_timesteps(int num_steps, const diffusion::NoiseSchedule& schedule);

/// Deterministic (eta = 0) sampling for one prompt tag.
Image sample(const model::Denoiser& denoiser, const model::LatentCodec& codec, const Image& x,
             data::PromptTag tag, const diffusion::NoiseSchedule& schedule, const SamplerConfig& cfg);

/// Softmax([Qh; Ql] [Kh; Kl]^T / sqrt(d)); with `isolate` the cross-branch
/// logits are -infinity.
Matrix merged_attention(const Matrix& q_high, const Matrix& q_low, const Matrix& k_high,
                        const Matrix& k_low, bool isolate);

/// Query/key tensors of both branches at one (site, step).
struct SiteCapture {
  std::string site;
  int step = 0;
  int grid_height = 0;
  int grid_width = 0;
  Matrix q_high;
  Matrix k_high;
  Matrix q_low;
  Matrix k_low;
};

struct TokenScores {
  std::vector<double> gen;
  std::vector<double> res;
};

/// Row mass of the high-branch queries over the K_high and K_low blocks,
/// averaged over all captures (which must share a token count).
TokenScores scores(std::span<const SiteCapture> captures);

struct GenerativeLevelMap {
  Image values;       // raw s_gen
  Image restoration;  // raw s_res
  Image normalized;   // min-max stretched copy of values for export
};

/// Reshapes row-major scores to grid_height x grid_width and resizes
/// bilinearly to height x width.
GenerativeLevelMap to_map(const TokenScores& s, int grid_height, int grid_width, int height, int width);

/// Groups captures by token grid, averages in token space per group, resizes
/// and averages the groups weighted by their capture counts.
GenerativeLevelMap map_from_captures(std::span<const SiteCapture> captures, int height, int width);

struct BranchOutputs {
  Image out_low;
  Image out_high;
  std::vector<SiteCapture> captured;
};

struct DualResult {
  BranchOutputs branches;
  GenerativeLevelMap map;
};

/// Runs LOW and HIGH with shared initial noise through isolated paired
/// inference and builds the level map from the captured tensors.
DualResult dual_infer(const model::Denoiser& denoiser, const model::LatentCodec& codec, const Image& x,
                      const diffusion::NoiseSchedule& schedule, const SamplerConfig& cfg);

}  // namespace hazegen::levelmap
