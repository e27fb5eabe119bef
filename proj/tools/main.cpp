// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include <omp.h>

#include <cstdio>
#include <filesystem>
#include <new>

#include <CLI11.hpp>

#include "commands.hpp"
#include "hazegen/error.hpp"

using namespace hazegen;

int main(int argc, char** argv) {
  CLI::App app{"hazegen: controllable generative night dehazing toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  app.add_option("-c,--config", config_path, "key = value configuration file");
  app.add_option("--seed", seed, "global seed (overrides HAZEGEN_SEED and the config)");
  app.add_option("--workers", workers, "cap on worker threads")->check(CLI::NonNegativeNumber);

  cli::AugmentArgs aug;
  auto* c_aug = app.add_subcommand("augment", "synthesize severe-degradation pairs from clear images");
  c_aug->add_option("--clear", aug.clear_dir, "directory of clear images")->required();
  c_aug->add_option("--lights", aug.light_dir, "directory of light maps")->required();
  c_aug->add_option("-o,--out", aug.out_dir, "output directory")->required();

  cli::BuildArgs build;
  auto* c_build = app.add_subcommand("build", "build initial-dehazing and detail-enhancement pairs");
  c_build->add_option("--haze", build.haze_dir, "directory of hazy images")->required();
  c_build->add_option("--restorer", build.restorer, "toy:identity | toy:autolevel | toy:constant:<v> | external:<path>");
  c_build->add_option("--enhancer", build.enhancer, "toy:identity | toy:unsharp | external:<path>");
  c_build->add_option("-o,--out", build.out_dir, "output directory")->required();

  cli::TrainArgs train;
  auto* c_train = app.add_subcommand("train", "fine-tune adapters on the three manifests");
  c_train->add_option("--id", train.id_manifest, "initial-dehazing manifest")->required();
  c_train->add_option("--de", train.de_manifest, "detail-enhancement manifest")->required();
  c_train->add_option("--bs", train.bs_manifest, "severe-degradation manifest")->required();
  c_train->add_option("--steps", train.steps, "override train.steps");
  c_train->add_option("-o,--out", train.out_dir, "output directory")->required();

  cli::InferArgs infer;
  auto* c_infer = app.add_subcommand("infer", "restore one image at a chosen generative level");
  c_infer->add_option("--checkpoint", infer.checkpoint, "checkpoint directory")->required();
  c_infer->add_option("--image", infer.image, "input image (.png or .f32)")->required();
  c_infer->add_option("--level", infer.level, "low | high | both")->capture_default_str();
  c_infer->add_flag("--map", infer.map, "also emit the generative-level map (needs --level both)");
  c_infer->add_option("--steps", infer.num_steps, "override sampler.num_steps");
  c_infer->add_option("-o,--out", infer.out_dir, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (workers > 0) omp_set_num_threads(workers);
    std::optional<std::uint64_t> seed_override = seed;
    if (!seed_override) seed_override = cli::seed_from_env();
    const auto cfg = cli::RunConfig::load(
        config_path.empty() ? std::nullopt : std::optional<std::filesystem::path>(config_path), seed_override);
    if (*c_aug) return cli::cmd_augment(aug, cfg);
    if (*c_build) return cli::cmd_build(build, cfg);
    if (*c_train) return cli::cmd_train(train, cfg);
    return cli::cmd_infer(infer, cfg);
  } catch (const Error& e) {
    std::fprintf(stderr, "hazegen: error: %s\n", e.what());
    return static_cast<int>(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::fprintf(stderr, "hazegen: error: %s\n", e.what());
    return static_cast<int>(ExitCode::kData);
  } catch (const std::bad_alloc&) {
    std::fprintf(stderr, "hazegen: error: out of memory\n");
    return 1;
  }
}
