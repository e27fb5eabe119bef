// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hazegen/level_map.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include "hazegen/error.hpp"

namespace hazegen::levelmap {

using diffusion::NoiseSchedule;
using model::Latent;

void SamplerConfig::validate(const NoiseSchedule& schedule) const {
  if (num_steps < 1) throw ConfigError("sampler.num_steps must be positive");
  if (num_steps > schedule.steps())
    throw ConfigError("sampler.num_steps (" + std::to_string(num_steps) +
                      ") exceeds the schedule length " + std::to_string(schedule.steps()));
  for (int s : capture_steps)
    if (s < 0 || s >= num_steps) throw ConfigError("sampler.capture_steps entry out of range: " + std::to_string(s));
}

SamplerConfig SamplerConfig::from_config(KeyValues& kv, const std::string& prefix) {
  SamplerConfig c;
  c.num_steps = static_cast<int>(kv.get_int(prefix + "num_steps", c.num_steps));
  c.seed = static_cast<std::uint64_t>(kv.get_int(prefix + "seed", static_cast<std::int64_t>(c.seed)));
  c.clip_denoised = kv.get_int(prefix + "clip_denoised", c.clip_denoised ? 1 : 0) != 0;
  std::istringstream steps(kv.get_string(prefix + "capture_steps", ""));
  for (std::string tok; std::getline(steps, tok, ',');) {
    tok.erase(0, tok.find_first_not_of(" \t"));
    tok.erase(tok.find_last_not_of(" \t") + 1);
    if (tok.empty()) continue;
    try {
      c.capture_steps.push_back(std::stoi(tok));
    } catch (const std::exception&) {
      throw ConfigError("bad sampler.capture_steps entry: " + tok);
    }
  }
  return c;
}

std::string SamplerConfig::to_text() const {
  std::ostringstream o;
  o << "num_steps = " << num_steps << "\nseed = " << seed << "\nclip_denoised = " << (clip_denoised ? 1 : 0)
    << "\ncapture_steps = \"";
  for (std::size_t i = 0; i < capture_steps.size(); ++i) o << (i ? ", " : "") << capture_steps[i];
  o << "\"\n";
  return o.str();
}

std::vector<int> sampling_timesteps(int num_steps, const NoiseSchedule& schedule) {
  if (num_steps < 1 || num_steps > schedule.steps())
    throw ConfigError("num_steps must lie in [1, " + std::to_string(schedule.steps()) + "]");
  const int stride = schedule.steps() / num_steps;
  std::vector<int> ts(num_steps);
  for (int k = 0; k < num_steps; ++k) ts[num_steps - 1 - k] = 1 + k * stride;
  return ts;
}

namespace {

struct Branch {
  Latent y;
  Latent condition;
  model::PromptEmbedding prompt;
};

// One eta = 0 update from timestep t to t_prev.
void ddim_update(Latent& y, const Latent& eps, double ab, double ab_prev, bool clip) {
  const double sa = std::sqrt(ab), s1 = std::sqrt(1.0 - ab);
  const double sp = std::sqrt(ab_prev), sp1 = std::sqrt(1.0 - ab_prev);
  for (std::size_t i = 0; i < y.data.size(); ++i) {
    double x0 = (y.data[i] - s1 * eps.data[i]) / sa;
    if (clip) x0 = std::clamp(x0, 0.0, 1.0);
    y.data[i] = sp * x0 + sp1 * eps.data[i];
  }
}

Branch start_branch(const model::Denoiser& denoiser, const model::LatentCodec& codec, const Image& x,
                    data::PromptTag tag, std::uint64_t seed) {
  Branch b;
  b.condition = codec.encode(x);
  Rng rng(seed);
  b.y = diffusion::gaussian_latent(b.condition.height, b.condition.width, b.condition.channels, rng);
  b.prompt = denoiser.encode_prompt(data::prompt_text(tag));
  return b;
}

Image finish(const model::LatentCodec& codec, const Latent& y) {
  Image out = codec.decode(y);
  clamp_unit(out);
  return out;
}

}  // namespace

Image sample(const model::Denoiser& denoiser, const model::LatentCodec& codec, const Image& x,
             data::PromptTag tag, const NoiseSchedule& schedule, const SamplerConfig& cfg) {
  cfg.validate(schedule);
  const std::vector<int> ts = sampling_timesteps(cfg.num_steps, schedule);
  Branch b = start_branch(denoiser, codec, x, tag, cfg.seed);
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const int t = ts[k];
    const int t_prev = k + 1 < ts.size() ? ts[k + 1] : 0;
    const Latent eps = denoiser.predict({&b.y, t, &b.prompt, &b.condition});
    ddim_update(b.y, eps, schedule.alpha_bar(t), schedule.alpha_bar(t_prev), cfg.clip_denoised);
  }
  return finish(codec, b.y);
}

Matrix merged_attention(const Matrix& q_high, const Matrix& q_low, const Matrix& k_high,
                        const Matrix& k_low, bool isolate) {
  const int n = q_high.rows, d = q_high.cols;
  for (const Matrix* m : {&q_low, &k_high, &k_low})
    if (m->rows != n || m->cols != d) throw DataError("merged attention: Q/K shapes differ across branches");
  Matrix q(2 * n, d), k(2 * n, d);
  std::copy(q_high.data.begin(), q_high.data.end(), q.data.begin());
  std::copy(q_low.data.begin(), q_low.data.end(), q.data.begin() + q_high.data.size());
  std::copy(k_high.data.begin(), k_high.data.end(), k.data.begin());
  std::copy(k_low.data.begin(), k_low.data.end(), k.data.begin() + k_high.data.size());
  return model::attention_probabilities(q, k, isolate ? n : 0);
}

TokenScores scores(std::span<const SiteCapture> captures) {
  if (captures.empty()) throw DataError("no attention captures to score");
  const int n = captures.front().q_high.rows;
  TokenScores s{std::vector<double>(n, 0.0), std::vector<double>(n, 0.0)};
  for (const SiteCapture& c : captures) {
    if (c.q_high.rows != n) throw DataError("captures disagree on token count");
    const Matrix a = merged_attention(c.q_high, c.q_low, c.k_high, c.k_low, false);
    for (int i = 0; i < n; ++i) {
      double gen = 0.0, res = 0.0;
      for (int j = 0; j < n; ++j) gen += a(i, j);
      for (int j = n; j < 2 * n; ++j) res += a(i, j);
      s.gen[i] += gen;
      s.res[i] += res;
    }
  }
  const double inv = 1.0 / static_cast<double>(captures.size());
  for (int i = 0; i < n; ++i) {
    s.gen[i] *= inv;
    s.res[i] *= inv;
  }
  return s;
}

namespace {

Image grid_image(const std::vector<double>& v, int gh, int gw) {
  Image g(gh, gw, 1);
  for (int i = 0; i < gh * gw; ++i) g.data()[i] = static_cast<float>(v[i]);
  return g;
}

Image normalize(const Image& v) {
  const float lo = min_value(v), hi = max_value(v);
  Image out(v.height(), v.width(), 1, 0.0f);
  if (hi > lo)
    for (std::size_t i = 0; i < v.data().size(); ++i) out.data()[i] = (v.data()[i] - lo) / (hi - lo);
  return out;
}

}  // namespace

GenerativeLevelMap to_map(const TokenScores& s, int grid_height, int grid_width, int height, int width) {
  if (grid_height < 1 || grid_width < 1 || height < 1 || width < 1)
    throw ConfigError("level map dimensions must be positive");
  const std::size_t n = static_cast<std::size_t>(grid_height) * grid_width;
  if (s.gen.size() != n || s.res.size() != n)
    throw DataError(std::to_string(s.gen.size()) + " token scores do not fill a " +
                    std::to_string(grid_height) + "x" + std::to_string(grid_width) + " grid");
  GenerativeLevelMap m;
  m.values = resize_bilinear(grid_image(s.gen, grid_height, grid_width), height, width);
  m.restoration = resize_bilinear(grid_image(s.res, grid_height, grid_width), height, width);
  m.normalized = normalize(m.values);
  return m;
}

GenerativeLevelMap map_from_captures(std::span<const SiteCapture> captures, int height, int width) {
  if (captures.empty()) throw DataError("no attention captures to score");
  std::map<std::pair<int, int>, std::vector<SiteCapture>> groups;
  for (const SiteCapture& c : captures) {
    if (static_cast<std::size_t>(c.grid_height) * c.grid_width != static_cast<std::size_t>(c.q_high.rows))
      throw DataError("capture at site " + c.site + " does not match its token grid");
    groups[{c.grid_height, c.grid_width}].push_back(c);
  }
  if (groups.size() == 1) {
    const auto& [grid, members] = *groups.begin();
    return to_map(scores(members), grid.first, grid.second, height, width);
  }
  Image gen(height, width, 1, 0.0f), res(height, width, 1, 0.0f);
  for (const auto& [grid, members] : groups) {
    const GenerativeLevelMap part = to_map(scores(members), grid.first, grid.second, height, width);
    const float w = static_cast<float>(members.size()) / static_cast<float>(captures.size());
    for (std::size_t i = 0; i < gen.data().size(); ++i) {
      gen.data()[i] += w * part.values.data()[i];
      res.data()[i] += w * part.restoration.data()[i];
    }
  }
  GenerativeLevelMap m{gen, res, normalize(gen)};
  return m;
}

DualResult dual_infer(const model::Denoiser& denoiser, const model::LatentCodec& codec, const Image& x,
                      const NoiseSchedule& schedule, const SamplerConfig& cfg) {
  cfg.validate(schedule);
  const std::vector<int> ts = sampling_timesteps(cfg.num_steps, schedule);
  Branch high = start_branch(denoiser, codec, x, data::PromptTag::kHigh, cfg.seed);
  Branch low = start_branch(denoiser, codec, x, data::PromptTag::kLow, cfg.seed);

  DualResult r;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    const int t = ts[k];
    const int t_prev = k + 1 < ts.size() ? ts[k + 1] : 0;
    const bool keep = cfg.capture_steps.empty() ||
                      std::find(cfg.capture_steps.begin(), cfg.capture_steps.end(), static_cast<int>(k)) !=
                          cfg.capture_steps.end();
    model::AttentionCapture cap_high, cap_low;
    auto [eps_high, eps_low] = denoiser.predict_pair({&high.y, t, &high.prompt, &high.condition},
                                                     {&low.y, t, &low.prompt, &low.condition}, true,
                                                     keep ? &cap_high : nullptr, keep ? &cap_low : nullptr);
    if (keep) {
      if (cap_high.records.size() != cap_low.records.size())
        throw DataError("branches captured different numbers of attention sites");
      for (std::size_t i = 0; i < cap_high.records.size(); ++i) {
        auto& h = cap_high.records[i];
        auto& l = cap_low.records[i];
        r.branches.captured.push_back({h.site, static_cast<int>(k), h.grid_height, h.grid_width,
                                       std::move(h.queries), std::move(h.keys), std::move(l.queries),
                                       std::move(l.keys)});
      }
    }
    ddim_update(high.y, eps_high, schedule.alpha_bar(t), schedule.alpha_bar(t_prev), cfg.clip_denoised);
    ddim_update(low.y, eps_low, schedule.alpha_bar(t), schedule.alpha_bar(t_prev), cfg.clip_denoised);
  }
  r.branches.out_high = finish(codec, high.y);
  r.branches.out_low = finish(codec, low.y);
  r.map = map_from_captures(r.branches.captured, x.height(), x.width());
  return r;
}

}  // namespace hazegen::levelmap
