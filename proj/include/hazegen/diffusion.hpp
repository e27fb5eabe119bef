// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hazegen/backbone.hpp"
#include "hazegen/config.hpp"
#include "hazegen/dataset.hpp"
#include "hazegen/rng.hpp"

namespace hazegen::diffusion {

using model::Latent;

/// Linear beta schedule. Timesteps are 1-based; alpha_bar(0) = 1.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(int steps = 1000, double beta_start = 1e-4, double beta_end = 0.02);

  int steps() const { return steps_; }
  double beta_start() const { return beta_start_; }
  double beta_end() const { return beta_end_; }
  double beta(int t) const;
  double alpha_bar(int t) const;

 private:
  int steps_;
  double beta_start_;
  double beta_end_;
  std::vector<double> betas_;       // index t-1
  std::vector<double> alpha_bars_;  // index t, [0] = 1
};

/// y_t = sqrt(alpha_bar) * y0 + sqrt(1 - alpha_bar) * eps.
Latent forward_diffuse(const Latent& y0, double alpha_bar, const Latent& eps);
/// Same with alpha_bar taken from the schedule; t must lie in [0, T].
Latent forward_diffuse(const Latent& y0, int t, const Latent& eps, const NoiseSchedule& schedule);

/// Standard-normal latent of the given shape.
Latent gaussian_latent(int height, int width, int channels, Rng& rng);

/// mean((mask * (eps - eps_pred))^2) with the single-channel mask broadcast
/// across latent channels. A null mask means all ones.
double masked_diffusion_loss(const Latent& eps_pred, const Latent& eps, const Image* mask);
/// Gradient of masked_diffusion_loss with respect to eps_pred, times `weight`.
Latent masked_diffusion_loss_grad(const Latent& eps_pred, const Latent& eps, const Image* mask,
                                  double weight);

struct TrainConfig {
  int batch_size = 12;
  int grad_accum = 4;
  double learning_rate = 2e-4;
  int steps = 200;
  int resolution = 32;
  int lora_rank = 8;
  double lora_alpha = 8.0;
  std::uint64_t seed = 0;
  int log_every = 1;
  int checkpoint_every = 0;  // 0 = only at the end

  void validate() const;
  static TrainConfig from_config(KeyValues& kv, const std::string& prefix = "");
  std::string to_text() const;
};

struct LossBreakdown {
  double id = 0.0;
  double de = 0.0;
  double bs = 0.0;
  double all = 0.0;
};

/// Adam over the flattened LoRA parameters of a denoiser.
struct AdamState {
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<double> m;
  std::vector<double> v;
};

/// Loss of one sample for a fixed (t, eps). When `grads` is non-null the
/// gradient of `weight * loss` is written there.
double sample_loss(const model::Denoiser& denoiser, const model::LatentCodec& codec,
                   const data::TrainingSample& sample, const NoiseSchedule& schedule, int t,
                   const Latent& eps, std::vector<model::SiteGradient>* grads = nullptr,
                   double weight = 1.0, bool base_grads = false);

/// Throws ConfigError unless the batch is ID | DE | BS thirds with matching
/// ID and DE source multisets.
void check_balanced(const data::Batch& batch);

/// One optimizer step: accumulates gradients of L_all = L_id + L_de + L_bs
/// over all micro-batches (each third averaged over its samples, then
/// averaged over micro-batches) and applies Adam to the adapter parameters
/// only. Returns the averaged loss breakdown.
LossBreakdown train_step(model::Denoiser& denoiser, const model::LatentCodec& codec,
                         std::span<const data::Batch> micro_batches, const NoiseSchedule& schedule,
                         AdamState& adam, Rng& rng);

/// L_all over whole datasets with noise and timesteps fixed by `seed`, so two
/// parameter states can be compared without sampling noise.
LossBreakdown evaluate(const model::Denoiser& denoiser, const model::LatentCodec& codec,
                       const data::Dataset& id_pairs, const data::Dataset& de_pairs,
                       const data::Dataset& bs_pairs, const NoiseSchedule& schedule,
                       std::uint64_t seed, int draws_per_sample = 4);

/// Called after every optimizer step with the 1-based step number.
using StepCallback = std::function<void(int step, const LossBreakdown& loss)>;

/// Runs `cfg.steps` optimizer steps of `cfg.grad_accum` balanced micro-batches
/// each. Adapters must already be attached. Batch order comes from
/// `cfg.seed`, timesteps and noise from `rng`.
std::vector<LossBreakdown> train(model::Denoiser& denoiser, const model::LatentCodec& codec,
                                 const data::Dataset& id_pairs, const data::Dataset& de_pairs,
                                 const data::Dataset& bs_pairs, const TrainConfig& cfg,
                                 const NoiseSchedule& schedule, Rng& rng,
                                 const StepCallback& on_step = {});

/// Flatten / scatter adapter parameters in site order (A then B).
std::vector<double> gather_lora(const model::Denoiser& denoiser);
std::vector<double> gather_lora_grads(const model::Denoiser& denoiser,
                                      const std::vector<model::SiteGradient>& grads);

}  // namespace hazegen::diffusion
