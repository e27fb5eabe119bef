// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hazegen/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "hazegen/dataset.hpp"
#include "hazegen/error.hpp"

namespace hazegen::checkpoint {
namespace fs = std::filesystem;

namespace {

constexpr const char* kMetaFile = "adapter.meta";

void write_tensor(std::ostream& out, const std::vector<float>& values, std::uint32_t rows,
                  std::uint32_t cols) {
  out.write(reinterpret_cast<const char*>(&rows), 4);
  out.write(reinterpret_cast<const char*>(&cols), 4);
  out.write(reinterpret_cast<const char*>(values.data()),
            static_cast<std::streamsize>(values.size() * sizeof(float)));
}

std::vector<float> read_tensor(std::istream& in, std::uint32_t& rows, std::uint32_t& cols,
                               const std::string& what) {
  if (!in.read(reinterpret_cast<char*>(&rows), 4) || !in.read(reinterpret_cast<char*>(&cols), 4))
    throw DataError("truncated tensor header in " + what);
  std::vector<float> v(static_cast<std::size_t>(rows) * cols);
  if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float))))
    throw DataError("truncated tensor payload in " + what);
  return v;
}

const data::PromptTag kAllTags[] = {data::PromptTag::kId, data::PromptTag::kDe, data::PromptTag::kBs,
                                    data::PromptTag::kLow, data::PromptTag::kHigh};

}  // namespace

void save_checkpoint(const model::ToyDenoiser& denoiser, const diffusion::NoiseSchedule& schedule,
                     const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".lora") fs::remove(entry.path());

  int rank = 0;
  double alpha = 0.0;
  for (const auto& site : denoiser.sites()) {
    if (!site.lora) continue;
    rank = site.lora->rank;
    alpha = site.lora->alpha;
    std::ofstream out(dir / (site.name + ".lora"), std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint blob for " + site.name);
    write_tensor(out, site.lora->a, site.lora->rank, site.lora->in);
    write_tensor(out, site.lora->b, site.lora->out, site.lora->rank);
  }
  if (rank == 0) throw ConfigError("denoiser has no adapters to save");

  std::ofstream meta(dir / kMetaFile);
  meta.precision(17);
  meta << "format = 1\n"
       << "rank = " << rank << "\n"
       << "alpha = " << alpha << "\n"
       << "schedule.steps = " << schedule.steps() << "\n"
       << "schedule.beta_start = " << schedule.beta_start() << "\n"
       << "schedule.beta_end = " << schedule.beta_end() << "\n"
       << "base.fingerprint = " << std::hex << denoiser.base_fingerprint() << std::dec << "\n";
  std::istringstream backbone(denoiser.config().to_text());
  for (std::string line; std::getline(backbone, line);) meta << "backbone." << line << "\n";
  for (auto tag : kAllTags)
    meta << "prompt." << data::tag_name(tag) << " = \"" << data::prompt_text(tag) << "\"\n";
  if (!meta) throw DataError("cannot write checkpoint metadata in " + dir.string());
}

AdapterState load_checkpoint(const fs::path& dir) {
  if (!fs::exists(dir / kMetaFile)) throw DataError("not a checkpoint directory: " + dir.string());
  KeyValues kv = KeyValues::load(dir / kMetaFile);
  AdapterState s;
  if (kv.get_int("format", 0) != 1) throw IncompatibleError("unsupported checkpoint format");
  s.rank = static_cast<int>(kv.get_int("rank", s.rank));
  s.alpha = kv.get_double("alpha", s.alpha);
  s.schedule_steps = static_cast<int>(kv.get_int("schedule.steps", s.schedule_steps));
  s.beta_start = kv.get_double("schedule.beta_start", s.beta_start);
  s.beta_end = kv.get_double("schedule.beta_end", s.beta_end);
  try {
    s.base_fingerprint = std::stoull(kv.get_string("base.fingerprint", "0"), nullptr, 16);
  } catch (const std::exception&) {
    throw ParseError("bad base.fingerprint in checkpoint", 0);
  }
  s.backbone = model::BackboneConfig::from_config(kv, "backbone.");
  for (auto tag : kAllTags) {
    const std::string name(data::tag_name(tag));
    s.prompts[name] = kv.get_string("prompt." + name, "");
  }
  kv.reject_unknown();

  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".lora") continue;
    std::ifstream in(entry.path(), std::ios::binary);
    model::LoraAdapter l;
    std::uint32_t ar = 0, ac = 0, br = 0, bc = 0;
    l.a = read_tensor(in, ar, ac, entry.path().string());
    l.b = read_tensor(in, br, bc, entry.path().string());
    if (static_cast<int>(ar) != s.rank || static_cast<int>(bc) != s.rank)
      throw IncompatibleError("adapter rank mismatch in " + entry.path().string());
    l.rank = s.rank;
    l.alpha = s.alpha;
    l.in = static_cast<int>(ac);
    l.out = static_cast<int>(br);
    s.adapters[entry.path().stem().string()] = std::move(l);
  }
  return s;
}

void apply_checkpoint(const AdapterState& state, model::Denoiser& denoiser) {
  if (state.base_fingerprint != denoiser.base_fingerprint())
    throw IncompatibleError("checkpoint was trained against a different base model");
  for (auto tag : kAllTags) {
    const auto it = state.prompts.find(std::string(data::tag_name(tag)));
    if (it == state.prompts.end() || it->second != data::prompt_text(tag))
      throw IncompatibleError("checkpoint prompt text differs for tag " + std::string(data::tag_name(tag)));
  }
  std::size_t used = 0;
  for (model::WeightSite* site : denoiser.adaptable_sites()) {
    const auto it = state.adapters.find(site->name);
    if (it == state.adapters.end()) throw IncompatibleError("checkpoint lacks adapter for " + site->name);
    if (it->second.out != site->out || it->second.in != site->in)
      throw IncompatibleError("adapter shape mismatch for " + site->name);
    site->lora = it->second;
    ++used;
  }
  if (used != state.adapters.size()) throw IncompatibleError("checkpoint has adapters for unknown sites");
}

}  // namespace hazegen::checkpoint
