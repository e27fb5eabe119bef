// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "hazegen/augment.hpp"
#include "hazegen/backbone.hpp"
#include "hazegen/dataset.hpp"
#include "hazegen/diffusion.hpp"
#include "hazegen/level_map.hpp"

namespace hazegen::cli {

namespace fs = std::filesystem;

/// Everything a command can be configured with. The file is a flat
/// `key = value` document with optional sections:
///   seed, [augment], [tiling], [build], [backbone], [train], [sampler].
/// Module seeds default to the global seed unless set in their section.
struct RunConfig {
  std::uint64_t seed = 0;
  augment::AugmentConfig augment;
  data::TileSettings tiles;
  std::string restorer = "toy:autolevel";
  std::string enhancer = "toy:unsharp";
  model::BackboneConfig backbone;
  diffusion::TrainConfig train;
  levelmap::SamplerConfig sampler;

  /// Reads `path` (if any), then applies the seed override. Unknown keys are
  /// a ConfigError.
  static RunConfig load(const std::optional<fs::path>& path, std::optional<std::uint64_t> seed_override);
  std::string to_text() const;
};

/// Seed from HAZEGEN_SEED, if set; ConfigError when it is not an integer.
std::optional<std::uint64_t> seed_from_env();

struct AugmentArgs {
  fs::path clear_dir;
  fs::path light_dir;
  fs::path out_dir;
};

struct BuildArgs {
  fs::path haze_dir;
  fs::path out_dir;
  std::string restorer;  // empty = config value
  std::string enhancer;
};

struct TrainArgs {
  fs::path id_manifest;
  fs::path de_manifest;
  fs::path bs_manifest;
  fs::path out_dir;
  std::optional<int> steps;
};

struct InferArgs {
  fs::path checkpoint;
  fs::path image;
  fs::path out_dir;
  std::string level = "both";
  bool map = false;
  std::optional<int> num_steps;
};

int cmd_augment(const AugmentArgs& args, const RunConfig& cfg);
int cmd_build(const BuildArgs& args, const RunConfig& cfg);
int cmd_train(const TrainArgs& args, const RunConfig& cfg);
int cmd_infer(const InferArgs& args, const RunConfig& cfg);

}  // namespace hazegen::cli
