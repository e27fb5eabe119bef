// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "hazegen/checkpoint.hpp"
#include "hazegen/error.hpp"
#include "hazegen/image_io.hpp"
#include "hazegen/lora.hpp"
#include "hazegen/tiling.hpp"

namespace hazegen::cli {

namespace {

void log(const std::string& msg) { std::fprintf(stderr, "hazegen: %s\n", msg.c_str()); }

std::string indexed(std::size_t i) {
  std::ostringstream os;
  os << std::setw(5) << std::setfill('0') << i;
  return os.str();
}

std::vector<Image> load_dir(const fs::path& dir, const char* what) {
  if (!fs::is_directory(dir)) throw DataError(std::string(what) + " directory not found: " + dir.string());
  std::vector<Image> out;
  for (const auto& p : io::list_images(dir)) out.push_back(io::load_image(p));
  if (out.empty()) throw DataError(std::string(what) + " directory has no images: " + dir.string());
  return out;
}

void echo_config(const fs::path& dir, const RunConfig& cfg) {
  fs::create_directories(dir);
  std::ofstream out(dir / "config.txt");
  out << cfg.to_text();
  if (!out) throw DataError("cannot write " + (dir / "config.txt").string());
}

// Bilinear resize of every image in a sample to size x size.
void resize_sample(data::TrainingSample& s, int size) {
  if (s.input.height() == size && s.input.width() == size) return;
  s.input = resize_bilinear(s.input, size, size);
  s.target = resize_bilinear(s.target, size, size);
  s.mask.values = resize_bilinear(s.mask.values, size, size);
}

data::Dataset load_subset(const fs::path& manifest, data::PromptTag expected, int resolution) {
  if (!fs::exists(manifest)) throw DataError("manifest not found: " + manifest.string());
  data::Dataset d = data::read_manifest(manifest);
  for (auto& s : d) {
    if (s.prompt != expected)
      throw DataError(manifest.string() + ": expected " + std::string(data::tag_name(expected)) +
                      " records, found " + std::string(data::tag_name(s.prompt)));
    resize_sample(s, resolution);
  }
  return d;
}

}  // namespace

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("HAZEGEN_SEED");
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0') throw ConfigError(std::string("HAZEGEN_SEED is not an integer: ") + v);
  return s;
}

namespace {

RunConfig load_config(KeyValues& kv, std::optional<std::uint64_t> seed_override) {
  RunConfig c;
  c.seed = static_cast<std::uint64_t>(kv.get_int("seed", 0));
  if (seed_override) c.seed = *seed_override;

  const bool augment_seed = kv.has("augment.seed");
  const bool train_seed = kv.has("train.seed");
  const bool sampler_seed = kv.has("sampler.seed");
  c.augment = augment::AugmentConfig::from_config(kv, "augment.");
  c.augment.validate();
  c.tiles.window = static_cast<int>(kv.get_int("tiling.window", c.tiles.window));
  c.tiles.stride = static_cast<int>(kv.get_int("tiling.stride", c.tiles.stride));
  c.tiles.tau = kv.get_double("tiling.tau", c.tiles.tau);
  if (c.tiles.window < 1 || c.tiles.stride < 1 || !(c.tiles.tau > 0))
    throw ConfigError("tiling.window, tiling.stride and tiling.tau must be positive");
  c.restorer = kv.get_string("build.restorer", c.restorer);
  c.enhancer = kv.get_string("build.enhancer", c.enhancer);
  c.backbone = model::BackboneConfig::from_config(kv, "backbone.");
  c.train = diffusion::TrainConfig::from_config(kv, "train.");
  c.sampler = levelmap::SamplerConfig::from_config(kv, "sampler.");
  kv.reject_unknown();

  if (!augment_seed || seed_override) c.augment.seed = c.seed;
  if (!train_seed || seed_override) c.train.seed = c.seed;
  if (!sampler_seed || seed_override) c.sampler.seed = c.seed;
  return c;
}

}  // namespace

RunConfig RunConfig::load(const std::optional<fs::path>& path, std::optional<std::uint64_t> seed_override) {
  if (path && !fs::exists(*path)) throw ConfigError("config file not found: " + path->string());
  // Malformed values in a config file are usage errors, not data errors.
  try {
    KeyValues kv = path ? KeyValues::load(*path) : KeyValues{};
    return load_config(kv, seed_override);
  } catch (const ParseError& e) {
    throw ConfigError((path ? path->string() + ": " : std::string()) + e.what());
  }
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "seed = " << seed << "\n\n[augment]\n" << augment.to_text() << "\n[tiling]\nwindow = " << tiles.window
     << "\nstride = " << tiles.stride << "\ntau = " << tiles.tau << "\n\n[build]\nrestorer = \"" << restorer
     << "\"\nenhancer = \"" << enhancer << "\"\n\n[backbone]\n" << backbone.to_text() << "\n[train]\n"
     << train.to_text() << "\n[sampler]\n" << sampler.to_text();
  return os.str();
}

int cmd_augment(const AugmentArgs& args, const RunConfig& cfg) {
  const std::vector<Image> clear = load_dir(args.clear_dir, "clear-image");
  const std::vector<Image> lights = load_dir(args.light_dir, "light-map");
  Rng rng(cfg.augment.seed);
  const data::Dataset bs = data::build_bs_pairs(clear, lights, cfg.augment, rng);

  echo_config(args.out_dir, cfg);
  fs::create_directories(args.out_dir / "images");
  double total = 0.0;
  for (std::size_t i = 0; i < bs.size(); ++i) {
    io::write_png(args.out_dir / "images" / (indexed(i) + ".png"), bs[i].input);
    total += *bs[i].severity;
  }
  data::write_manifest(bs, args.out_dir / "bs.jsonl");
  std::printf("records: %zu\nmean severity: %.9f\n", bs.size(), total / static_cast<double>(bs.size()));
  return 0;
}

int cmd_build(const BuildArgs& args, const RunConfig& cfg) {
  const std::string restorer_spec = args.restorer.empty() ? cfg.restorer : args.restorer;
  const std::string enhancer_spec = args.enhancer.empty() ? cfg.enhancer : args.enhancer;
  // Resolve both specs before touching any data.
  auto restorer = tiling::make_restorer(restorer_spec, cfg.tiles.window);
  auto enhancer = data::make_enhancer(enhancer_spec);
  const std::vector<Image> haze = load_dir(args.haze_dir, "haze-image");

  const data::Dataset id = data::build_id_pairs(haze, *restorer, cfg.tiles);
  const data::Dataset de = data::build_de_pairs(id, *enhancer);

  RunConfig echoed = cfg;
  echoed.restorer = restorer_spec;
  echoed.enhancer = enhancer_spec;
  echo_config(args.out_dir, echoed);
  fs::create_directories(args.out_dir / "masks");
  for (std::size_t i = 0; i < id.size(); ++i)
    io::write_png(args.out_dir / "masks" / (indexed(i) + ".png"), id[i].mask.values);
  data::write_manifest(id, args.out_dir / "id.jsonl");
  data::write_manifest(de, args.out_dir / "de.jsonl");
  std::printf("id records: %zu\nde records: %zu\n", id.size(), de.size());
  return 0;
}

int cmd_train(const TrainArgs& args, const RunConfig& cfg_in) {
  RunConfig cfg = cfg_in;
  if (args.steps) cfg.train.steps = *args.steps;
  cfg.train.validate();
  const int res = cfg.train.resolution;
  const data::Dataset id = load_subset(args.id_manifest, data::PromptTag::kId, res);
  const data::Dataset de = load_subset(args.de_manifest, data::PromptTag::kDe, res);
  const data::Dataset bs = load_subset(args.bs_manifest, data::PromptTag::kBs, res);

  model::ToyDenoiser net(cfg.backbone);
  Rng rng(cfg.train.seed);
  model::attach_lora(net, cfg.train.lora_rank, cfg.train.lora_alpha, &rng);
  const model::IdentityCodec codec;
  const diffusion::NoiseSchedule schedule;

  echo_config(args.out_dir, cfg);
  std::ofstream log_file(args.out_dir / "loss_log.csv");
  log_file << "step,L_id,L_de,L_bs,L_all\n";
  log_file.precision(17);
  log("training " + std::to_string(cfg.train.steps) + " steps on " + std::to_string(id.size()) + "/" +
      std::to_string(de.size()) + "/" + std::to_string(bs.size()) + " ID/DE/BS samples");

  diffusion::train(net, codec, id, de, bs, cfg.train, schedule, rng,
                   [&](int step, const diffusion::LossBreakdown& l) {
                     if (step % cfg.train.log_every == 0 || step == cfg.train.steps) {
                       log_file << step << "," << l.id << "," << l.de << "," << l.bs << "," << l.all << "\n";
                       log_file.flush();
                       char line[128];
                       std::snprintf(line, sizeof line, "step %d L_all %.6f", step, l.all);
                       log(line);
                     }
                     if (cfg.train.checkpoint_every > 0 && step % cfg.train.checkpoint_every == 0)
                       checkpoint::save_checkpoint(net, schedule,
                                                   args.out_dir / "checkpoints" / ("step_" + indexed(step)));
                   });
  if (!log_file) throw DataError("cannot write loss log");
  checkpoint::save_checkpoint(net, schedule, args.out_dir / "checkpoint");
  std::printf("checkpoint: %s\n", (args.out_dir / "checkpoint").string().c_str());
  return 0;
}

int cmd_infer(const InferArgs& args, const RunConfig& cfg) {
  if (args.level != "low" && args.level != "high" && args.level != "both")
    throw ConfigError("--level must be low, high or both");
  if (args.map && args.level != "both") throw ConfigError("--map requires --level both");

  const checkpoint::AdapterState state = checkpoint::load_checkpoint(args.checkpoint);
  model::ToyDenoiser net(state.backbone);
  checkpoint::apply_checkpoint(state, net);
  const diffusion::NoiseSchedule schedule = state.schedule();
  levelmap::SamplerConfig sampler = cfg.sampler;
  if (args.num_steps) sampler.num_steps = *args.num_steps;
  sampler.validate(schedule);
  if (!fs::exists(args.image)) throw DataError("input image not found: " + args.image.string());
  const Image x = io::load_image(args.image);
  const model::IdentityCodec codec;

  RunConfig echoed = cfg;
  echoed.sampler = sampler;
  echoed.backbone = state.backbone;
  echo_config(args.out_dir, echoed);

  if (args.map) {
    const levelmap::DualResult r = levelmap::dual_infer(net, codec, x, schedule, sampler);
    io::write_png(args.out_dir / "out_low.png", r.branches.out_low);
    io::write_png(args.out_dir / "out_high.png", r.branches.out_high);
    io::write_raw(args.out_dir / "map_raw.f32", r.map.values);
    io::write_png(args.out_dir / "map_vis.png", r.map.normalized);
    std::printf("map range: [%.6f, %.6f]\n", min_value(r.map.values), max_value(r.map.values));
    return 0;
  }
  if (args.level != "high")
    io::write_png(args.out_dir / "out_low.png",
                  levelmap::sample(net, codec, x, data::PromptTag::kLow, schedule, sampler));
  if (args.level != "low")
    io::write_png(args.out_dir / "out_high.png",
                  levelmap::sample(net, codec, x, data::PromptTag::kHigh, schedule, sampler));
  return 0;
}

}  // namespace hazegen::cli
