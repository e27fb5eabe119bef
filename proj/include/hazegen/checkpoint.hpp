// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "hazegen/backbone.hpp"
#include "hazegen/diffusion.hpp"

namespace hazegen::checkpoint {

/// Adapter weights plus everything needed to rebuild the frozen base.
struct AdapterState {
  int rank = 8;
  double alpha = 8.0;
  int schedule_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::uint64_t base_fingerprint = 0;
  model::BackboneConfig backbone;
  std::map<std::string, std::string> prompts;  // tag name -> prompt text
  std::map<std::string, model::LoraAdapter> adapters;

  diffusion::NoiseSchedule schedule() const {
    return diffusion::NoiseSchedule(schedule_steps, beta_start, beta_end);
  }
};

/// Directory layout: `adapter.meta` (key = value text) and one
/// `<site>.lora` blob per adapted site holding A then B, each as a u32 rows,
/// u32 cols header followed by little-endian float32 data.
void save_checkpoint(const model::ToyDenoiser& denoiser, const diffusion::NoiseSchedule& schedule,
                     const std::filesystem::path& dir);

AdapterState load_checkpoint(const std::filesystem::path& dir);

/// Installs the adapters into `denoiser`; IncompatibleError when the base
/// fingerprint or site shapes differ.
void apply_checkpoint(const AdapterState& state, model::Denoiser& denoiser);

}  // namespace hazegen::checkpoint
