// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hazegen/lora.hpp"

#include <algorithm>
#include <cmath>

#include "hazegen/backbone.hpp"
#include "hazegen/error.hpp"

namespace hazegen::model {

std::vector<double> WeightSite::effective_weight() const {
  std::vector<double> w(weight.begin(), weight.end());
  if (!lora) return w;
  const LoraAdapter& l = *lora;
  const double s = l.scale();
  for (int o = 0; o < out; ++o) {
    for (int r = 0; r < l.rank; ++r) {
      const double bv = s * l.b[static_cast<std::size_t>(o) * l.rank + r];
      if (bv == 0.0) continue;
      const float* ar = &l.a[static_cast<std::size_t>(r) * in];
      double* wr = &w[static_cast<std::size_t>(o) * in];
      for (int i = 0; i < in; ++i) wr[i] += bv * ar[i];
    }
  }
  return w;
}

std::vector<double> WeightSite::bias_as_double() const {
  return std::vector<double>(bias.begin(), bias.end());
}

void attach_lora(Denoiser& denoiser, int rank, double alpha, Rng* rng) {
  if (rank < 1) throw ConfigError("LoRA rank must be >= 1");
  auto sites = denoiser.adaptable_sites();
  for (WeightSite* site : sites) {
    if (rank > std::min(site->out, site->in))
      throw ConfigError("LoRA rank " + std::to_string(rank) + " exceeds min(out, in) of site " +
                        site->name);
  }
  Rng fallback(0x10a5eedULL);
  Rng& r = rng ? *rng : fallback;
  const double sd = 1.0 / std::sqrt(static_cast<double>(rank));
  for (WeightSite* site : sites) {
    LoraAdapter l;
    l.rank = rank;
    l.alpha = alpha;
    l.out = site->out;
    l.in = site->in;
    l.a.resize(static_cast<std::size_t>(rank) * site->in);
    for (float& v : l.a) v = static_cast<float>(r.normal() * sd);
    l.b.assign(static_cast<std::size_t>(site->out) * rank, 0.0f);
    site->lora = std::move(l);
  }
}

std::size_t lora_parameter_count(const Denoiser& denoiser) {
  std::size_t n = 0;
  for (const WeightSite& s : denoiser.sites())
    if (s.lora) n += s.lora->parameter_count();
  return n;
}

std::vector<std::vector<float>> snapshot_base(const Denoiser& denoiser) {
  std::vector<std::vector<float>> out;
  for (const WeightSite& s : denoiser.sites()) {
    out.push_back(s.weight);
    out.push_back(s.bias);
  }
  return out;
}

}  // namespace hazegen::model
