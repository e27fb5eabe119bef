// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hazegen/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <sstream>

#include "hazegen/error.hpp"

namespace hazegen::diffusion {

NoiseSchedule::NoiseSchedule(int steps, double beta_start, double beta_end)
    : steps_(steps), beta_start_(beta_start), beta_end_(beta_end) {
  if (steps < 1) throw ConfigError("schedule needs at least one step");
  if (!(beta_start > 0 && beta_end < 1 && beta_start <= beta_end))
    throw ConfigError("betas must satisfy 0 < start <= end < 1");
  betas_.resize(steps);
  alpha_bars_.resize(steps + 1);
  alpha_bars_[0] = 1.0;
  for (int i = 0; i < steps; ++i) {
    betas_[i] = steps == 1 ? beta_start
                           : beta_start + (beta_end - beta_start) * i / static_cast<double>(steps - 1);
    alpha_bars_[i + 1] = alpha_bars_[i] * (1.0 - betas_[i]);
  }
}

double NoiseSchedule::beta(int t) const {
  if (t < 1 || t > steps_) throw ConfigError("timestep out of range: " + std::to_string(t));
  return betas_[t - 1];
}

double NoiseSchedule::alpha_bar(int t) const {
  if (t < 0 || t > steps_) throw ConfigError("timestep out of range: " + std::to_string(t));
  return alpha_bars_[t];
}

Latent forward_diffuse(const Latent& y0, double alpha_bar, const Latent& eps) {
  if (!y0.same_shape(eps)) throw DataError("forward_diffuse: noise shape differs from latent");
  const double a = std::sqrt(alpha_bar), b = std::sqrt(1.0 - alpha_bar);
  Latent out = y0;
  for (std::size_t i = 0; i < out.data.size(); ++i) out.data[i] = a * y0.data[i] + b * eps.data[i];
  return out;
}

Latent forward_diffuse(const Latent& y0, int t, const Latent& eps, const NoiseSchedule& schedule) {
  return forward_diffuse(y0, schedule.alpha_bar(t), eps);
}

Latent gaussian_latent(int height, int width, int channels, Rng& rng) {
  Latent z(height, width, channels);
  for (double& v : z.data) v = rng.normal();
  return z;
}

namespace {

void check_loss_shapes(const Latent& pred, const Latent& eps, const Image* mask) {
  if (!pred.same_shape(eps)) throw DataError("loss: prediction and noise differ in shape");
  if (mask && (mask->height() != pred.height || mask->width() != pred.width || mask->channels() != 1))
    throw DataError("loss: mask does not match the latent grid");
}

}  // namespace

double masked_diffusion_loss(const Latent& eps_pred, const Latent& eps, const Image* mask) {
  check_loss_shapes(eps_pred, eps, mask);
  const int c_n = eps.channels;
  double sum = 0.0;
  for (std::size_t i = 0; i < eps.data.size(); ++i) {
    const double m = mask ? mask->data()[i / c_n] : 1.0;
    const double r = m * (eps.data[i] - eps_pred.data[i]);
    sum += r * r;
  }
  return sum / static_cast<double>(eps.data.size());
}

Latent masked_diffusion_loss_grad(const Latent& eps_pred, const Latent& eps, const Image* mask,
                                  double weight) {
  check_loss_shapes(eps_pred, eps, mask);
  const int c_n = eps.channels;
  const double n = static_cast<double>(eps.data.size());
  Latent g = eps_pred;
  for (std::size_t i = 0; i < eps.data.size(); ++i) {
    const double m = mask ? mask->data()[i / c_n] : 1.0;
    g.data[i] = -2.0 * weight * m * m * (eps.data[i] - eps_pred.data[i]) / n;
  }
  return g;
}

// ---------------------------------------------------------------------------

void TrainConfig::validate() const {
  if (batch_size <= 0 || batch_size % 3 != 0)
    throw ConfigError("batch_size must be a positive multiple of 3");
  if (grad_accum < 1 || !(learning_rate > 0) || steps < 0 || resolution < 1 || lora_rank < 1 ||
      !(lora_alpha > 0) || log_every < 1 || checkpoint_every < 0)
    throw ConfigError("invalid training configuration");
}

TrainConfig TrainConfig::from_config(KeyValues& kv, const std::string& prefix) {
  TrainConfig c;
  c.batch_size = static_cast<int>(kv.get_int(prefix + "batch_size", c.batch_size));
  c.grad_accum = static_cast<int>(kv.get_int(prefix + "grad_accum", c.grad_accum));
  c.learning_rate = kv.get_double(prefix + "learning_rate", c.learning_rate);
  c.steps = static_cast<int>(kv.get_int(prefix + "steps", c.steps));
  c.resolution = static_cast<int>(kv.get_int(prefix + "resolution", c.resolution));
  c.lora_rank = static_cast<int>(kv.get_int(prefix + "lora_rank", c.lora_rank));
  c.lora_alpha = kv.get_double(prefix + "lora_alpha", c.lora_alpha);
  c.seed = static_cast<std::uint64_t>(kv.get_int(prefix + "seed", static_cast<std::int64_t>(c.seed)));
  c.log_every = static_cast<int>(kv.get_int(prefix + "log_every", c.log_every));
  c.checkpoint_every = static_cast<int>(kv.get_int(prefix + "checkpoint_every", c.checkpoint_every));
  c.validate();
  return c;
}

std::string TrainConfig::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "batch_size = " << batch_size << "\ngrad_accum = " << grad_accum
     << "\nlearning_rate = " << learning_rate << "\nsteps = " << steps
     << "\nresolution = " << resolution << "\nlora_rank = " << lora_rank
     << "\nlora_alpha = " << lora_alpha << "\nseed = " << seed << "\nlog_every = " << log_every
     << "\ncheckpoint_every = " << checkpoint_every << "\n";
  return os.str();
}

double sample_loss(const model::Denoiser& denoiser, const model::LatentCodec& codec,
                   const data::TrainingSample& sample, const NoiseSchedule& schedule, int t,
                   const Latent& eps, std::vector<model::SiteGradient>* grads, double weight,
                   bool base_grads) {
  const Latent target = codec.encode(sample.target);
  const Latent condition = codec.encode(sample.input);
  const Latent noisy = forward_diffuse(target, t, eps, schedule);
  const model::PromptEmbedding prompt = denoiser.encode_prompt(data::prompt_text(sample.prompt));
  // Severe-degradation pairs carry all-ones masks; skip the multiply there.
  const Image* mask = sample.prompt == data::PromptTag::kBs ? nullptr : &sample.mask.values;
  if (mask && codec.factor() != 1) throw ConfigError("masked loss needs a full-resolution latent");
  const model::DenoiserInput in{&noisy, t, &prompt, &condition};

  if (!grads) return masked_diffusion_loss(denoiser.predict(in), eps, mask);
  double loss = 0.0;
  denoiser.predict_backprop(
      in,
      [&](const Latent& pred) {
        loss = masked_diffusion_loss(pred, eps, mask);
        return masked_diffusion_loss_grad(pred, eps, mask, weight);
      },
      *grads, base_grads);
  return loss;
}

void check_balanced(const data::Batch& batch) {
  const std::size_t n = batch.samples.size();
  if (n == 0 || n % 3 != 0) throw ConfigError("batch is not split into equal thirds");
  const std::size_t k = n / 3;
  std::vector<int> id_sources, de_sources;
  for (std::size_t i = 0; i < n; ++i) {
    const auto expected = i < k ? data::PromptTag::kId : i < 2 * k ? data::PromptTag::kDe : data::PromptTag::kBs;
    if (batch.samples[i]->prompt != expected) throw ConfigError("batch thirds are not ID | DE | BS");
    if (i < k) id_sources.push_back(batch.samples[i]->source_index);
    else if (i < 2 * k) de_sources.push_back(batch.samples[i]->source_index);
  }
  std::sort(id_sources.begin(), id_sources.end());
  std::sort(de_sources.begin(), de_sources.end());
  if (id_sources != de_sources) throw ConfigError("ID and DE thirds use different haze inputs");
}

std::vector<double> gather_lora(const model::Denoiser& denoiser) {
  std::vector<double> out;
  for (const auto& s : denoiser.sites()) {
    if (!s.lora) continue;
    out.insert(out.end(), s.lora->a.begin(), s.lora->a.end());
    out.insert(out.end(), s.lora->b.begin(), s.lora->b.end());
  }
  return out;
}

std::vector<double> gather_lora_grads(const model::Denoiser& denoiser,
                                      const std::vector<model::SiteGradient>& grads) {
  std::vector<double> out;
  const auto sites = denoiser.sites();
  for (std::size_t i = 0; i < sites.size(); ++i) {
    if (!sites[i].lora) continue;
    out.insert(out.end(), grads[i].lora_a.begin(), grads[i].lora_a.end());
    out.insert(out.end(), grads[i].lora_b.begin(), grads[i].lora_b.end());
  }
  return out;
}

namespace {

void apply_adam(model::Denoiser& denoiser, const std::vector<double>& grad, AdamState& adam) {
  if (adam.m.empty()) {
    adam.m.assign(grad.size(), 0.0);
    adam.v.assign(grad.size(), 0.0);
  }
  if (adam.m.size() != grad.size()) throw ConfigError("optimizer state does not match the adapters");
  ++adam.step;
  const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
  std::size_t idx = 0;
  auto update = [&](std::vector<float>& params) {
    for (float& p : params) {
      const double g = grad[idx];
      adam.m[idx] = adam.beta1 * adam.m[idx] + (1.0 - adam.beta1) * g;
      adam.v[idx] = adam.beta2 * adam.v[idx] + (1.0 - adam.beta2) * g * g;
      const double mhat = adam.m[idx] / c1, vhat = adam.v[idx] / c2;
      p = static_cast<float>(p - adam.learning_rate * mhat / (std::sqrt(vhat) + adam.epsilon));
      ++idx;
    }
  };
  for (auto& s : denoiser.mutable_sites()) {
    if (!s.lora) continue;
    update(s.lora->a);
    update(s.lora->b);
  }
}

}  // namespace

LossBreakdown train_step(model::Denoiser& denoiser, const model::LatentCodec& codec,
                         std::span<const data::Batch> micro_batches, const NoiseSchedule& schedule,
                         AdamState& adam, Rng& rng) {
  if (micro_batches.empty()) throw ConfigError("train_step needs at least one micro-batch");
  for (const auto& b : micro_batches) check_balanced(b);

  struct Job {
    const data::TrainingSample* sample;
    int t;
    Latent eps;
    double weight;
    double loss = 0.0;
    std::vector<model::SiteGradient> grads;
  };
  // Draw every (t, eps) up front so results do not depend on thread count.
  std::vector<Job> jobs;
  const double accum = static_cast<double>(micro_batches.size());
  for (const auto& b : micro_batches) {
    const double w = 1.0 / (static_cast<double>(b.third()) * accum);
    for (const auto* s : b.samples) {
      const Latent probe = codec.encode(s->target);
      const int t = static_cast<int>(rng.uniform_int(1, schedule.steps()));
      jobs.push_back({s, t, gaussian_latent(probe.height, probe.width, probe.channels, rng), w, 0.0, {}});
    }
  }

  std::vector<std::exception_ptr> failures(jobs.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    try {
      Job& j = jobs[i];
      j.loss = sample_loss(denoiser, codec, *j.sample, schedule, j.t, j.eps, &j.grads, j.weight);
    } catch (...) {
      failures[i] = std::current_exception();
    }
  }
  for (const auto& f : failures)
    if (f) std::rethrow_exception(f);

  // Fixed-order reduction.
  std::vector<double> total;
  LossBreakdown out;
  for (const Job& j : jobs) {
    const std::vector<double> g = gather_lora_grads(denoiser, j.grads);
    if (total.empty()) total.assign(g.size(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) total[i] += g[i];
    const double contrib = j.loss * j.weight;
    switch (j.sample->prompt) {
      case data::PromptTag::kId: out.id += contrib; break;
      case data::PromptTag::kDe: out.de += contrib; break;
      default: out.bs += contrib; break;
    }
  }
  out.all = out.id + out.de + out.bs;
  apply_adam(denoiser, total, adam);
  return out;
}

LossBreakdown evaluate(const model::Denoiser& denoiser, const model::LatentCodec& codec,
                       const data::Dataset& id_pairs, const data::Dataset& de_pairs,
                       const data::Dataset& bs_pairs, const NoiseSchedule& schedule,
                       std::uint64_t seed, int draws_per_sample) {
  auto subset_loss = [&](const data::Dataset& d, std::uint64_t salt) {
    if (d.empty()) return 0.0;
    Rng rng(seed ^ salt);
    std::vector<std::pair<int, Latent>> draws;
    std::vector<const data::TrainingSample*> owners;
    for (const auto& s : d) {
      const Latent probe = codec.encode(s.target);
      for (int k = 0; k < draws_per_sample; ++k) {
        const int t = static_cast<int>(rng.uniform_int(1, schedule.steps()));
        draws.emplace_back(t, gaussian_latent(probe.height, probe.width, probe.channels, rng));
        owners.push_back(&s);
      }
    }
    std::vector<double> losses(draws.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < draws.size(); ++i)
      losses[i] = sample_loss(denoiser, codec, *owners[i], schedule, draws[i].first, draws[i].second);
    double sum = 0.0;
    for (double l : losses) sum += l;
    return sum / static_cast<double>(losses.size());
  };
  LossBreakdown out;
  out.id = subset_loss(id_pairs, 0x1d);
  out.de = subset_loss(de_pairs, 0xde);
  out.bs = subset_loss(bs_pairs, 0xb5);
  out.all = out.id + out.de + out.bs;
  return out;
}

std::vector<LossBreakdown> train(model::Denoiser& denoiser, const model::LatentCodec& codec,
                                 const data::Dataset& id_pairs, const data::Dataset& de_pairs,
                                 const data::Dataset& bs_pairs, const TrainConfig& cfg,
                                 const NoiseSchedule& schedule, Rng& rng, const StepCallback& on_step) {
  cfg.validate();
  if (model::lora_parameter_count(denoiser) == 0) throw ConfigError("train: no adapters attached");
  data::BatchStream stream(id_pairs, de_pairs, bs_pairs, cfg.batch_size, cfg.seed);
  AdamState adam;
  adam.learning_rate = cfg.learning_rate;
  std::vector<LossBreakdown> history;
  history.reserve(cfg.steps);
  for (int step = 1; step <= cfg.steps; ++step) {
    std::vector<data::Batch> micro;
    for (int a = 0; a < cfg.grad_accum; ++a) micro.push_back(stream.next());
    history.push_back(train_step(denoiser, codec, micro, schedule, adam, rng));
    if (on_step) on_step(step, history.back());
  }
  return history;
}

}  // namespace hazegen::diffusion
