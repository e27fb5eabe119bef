// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned here.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "cli_runner.hpp"
#include "hazegen/augment.hpp"
#include "hazegen/checkpoint.hpp"
#include "hazegen/dataset.hpp"
#include "hazegen/diffusion.hpp"
#include "hazegen/image_io.hpp"
#include "hazegen/level_map.hpp"
#include "hazegen/lora.hpp"
#include "hazegen/tiling.hpp"
#include "support.hpp"
#include "tiling_oracle.hpp"

using namespace hazegen;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and budgets.
constexpr double kSeverityFloor = 0.90;
constexpr double kComposeTol = 1e-6;
constexpr double kGuardTol = 1e-5;
constexpr double kTilingTol = 1e-6;
constexpr double kSumTol = 1e-9;
constexpr double kGradStep = 1e-4;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradFloor = 1e-7;  // below this magnitude compare absolutely
constexpr double kLossDrop = 0.30;
constexpr double kScoreSumTol = 1e-6;
constexpr double kIsolateTol = 1e-9;
constexpr double kMapTol = 1e-6;

constexpr double kBudget1 = 30, kBudget2 = 1, kBudget3 = 60, kBudget7 = 600, kBudget8 = 60, kBudget9 = 900;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, static_cast<double>(args)...);
  return buf;
}

int failures = 0;

void report(int id, const char* name, const std::function<Outcome()>& body, double budget) {
  const auto t0 = Clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = seconds_since(t0);
  if (budget > 0 && secs > budget) {
    o.pass = false;
    o.detail += fmt(" [over budget %.0fs]", budget);
  }
  if (!o.pass) ++failures;
  std::printf("[%s] %d %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

// -- 1 ----------------------------------------------------------------------

Outcome severity_statistic() {
  Rng rng(2026);
  std::vector<Image> lights;
  for (int i = 0; i < 4; ++i) {
    lights.push_back(testing::bright_light(128, 128, rng));
    if (mean_value(lights.back()) < 0.5) return {false, "light fixture mean below 0.5"};
  }
  std::vector<Image> clear;
  for (int i = 0; i < 24; ++i) clear.push_back(testing::synthetic_clear(128, 128, rng));
  const augment::AugmentConfig cfg;
  Rng draw(cfg.seed);
  double sum = 0, lo = 1, hi = 0;
  for (const Image& c : clear) {
    const double s = augment::augment(c, lights, cfg, draw).severity;
    sum += s;
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  const double mean = sum / clear.size();
  return {mean >= kSeverityFloor && lo >= 0 && hi <= 1, fmt("mean S %.4f over 24 images, range [%.4f, %.4f]", mean, lo, hi)};
}

// -- 2 ----------------------------------------------------------------------

Outcome compose_exactness() {
  using namespace augment;
  double worst = 0, worst_guard = 0;
  // (a) constant fields: 0.5*0.2 + 0.5*0.6 + 0.1 = 0.5, S = 1 - 0.1/(0.5 + 1e-6).
  {
    const Image j(3, 3, 3, 0.2f), l(3, 3, 3, 0.6f);
    const BlendWeightMap w{Image(3, 3, 1, 0.5f)};
    const Image out = compose(j, w, l, NoiseField{Image(3, 3, 3, 0.1f)});
    for (float v : out.data()) worst = std::max(worst, std::abs(v - 0.5));
    worst = std::max(worst, std::abs(severity(j, w, out) - (1.0 - 0.1 / (0.5 + 1e-6))));
  }
  // (b) random per-pixel fields against a brute-force loop, clamping included.
  {
    Rng rng(9);
    Image j(7, 5, 3), l(7, 5, 3), n(7, 5, 3), wb(7, 5, 1);
    for (float& v : j.data()) v = static_cast<float>(rng.uniform());
    for (float& v : l.data()) v = static_cast<float>(rng.uniform());
    for (float& v : n.data()) v = static_cast<float>(rng.uniform(0, 0.3));
    for (float& v : wb.data()) v = static_cast<float>(rng.uniform());
    const BlendWeightMap w{wb};
    const Image out = compose(j, w, l, NoiseField{n});
    double ratio = 0;
    for (int y = 0; y < 7; ++y)
      for (int x = 0; x < 5; ++x)
        for (int c = 0; c < 3; ++c) {
          const double a = wb.at(y, x);
          const double want = std::clamp(a * j.at(y, x, c) + (1 - a) * l.at(y, x, c) + n.at(y, x, c), 0.0, 1.0);
          worst = std::max(worst, std::abs(out.at(y, x, c) - want));
          ratio += a * j.at(y, x, c) / (out.at(y, x, c) + 1e-6);
        }
    worst = std::max(worst, std::abs(severity(j, w, out) - (1.0 - ratio / (7 * 5 * 3))));
  }
  // (c) guard case: J = I = 1e-6 with W_b = 1, so S = 1 - 1e-6 / 2e-6 = 0.5.
  {
    const Image j(2, 2, 3, 1e-6f), black(2, 2, 3, 0.0f);
    const BlendWeightMap w{Image(2, 2, 1, 1.0f)};
    const Image out = compose(j, w, black, NoiseField{black});
    worst_guard = std::abs(severity(j, w, out) - 0.5);
  }
  return {worst <= kComposeTol && worst_guard <= kGuardTol,
          fmt("max error %.2e (tol %.0e), guard case %.2e (tol %.0e)", worst, kComposeTol, worst_guard, kGuardTol)};
}

// -- 3 ----------------------------------------------------------------------

Outcome tiling_oracle() {
  Rng rng(224);
  double worst = 0;
  int runs = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const int h = static_cast<int>(rng.uniform_int(224, 512)), w = static_cast<int>(rng.uniform_int(224, 512));
    const Image img = testing::synthetic_haze(h, w, rng);
    for (int stride : {64, 112, 224}) {
      tiling::AutoLevelRestorer r(224);
      const tiling::TiledResult got = tiling::run_tiled(r, img, tiling::tile_plan(h, w, 224, stride));
      const auto want = testing::brute_force_tiled(r, img, 224, stride);
      for (std::size_t i = 0; i < want.mean.size(); ++i)
        worst = std::max(worst, std::abs(got.mean.data()[i] - want.mean[i]));
      for (std::size_t i = 0; i < want.variance.size(); ++i)
        worst = std::max(worst, std::abs(got.variance.data()[i] - want.variance[i]));
      ++runs;
    }
  }
  return {worst <= kTilingTol, fmt("%.0f runs, max |diff| %.2e (tol %.0e)", runs, worst, kTilingTol)};
}

// -- shared desk run (4, 5, 7) -----------------------------------------------

struct DeskRun {
  testing::DeskData data;
  model::ToyDenoiser initial;
  model::ToyDenoiser net;
  diffusion::TrainConfig cfg;
  Rng rng_before;
  std::vector<std::vector<float>> base_before;
  std::vector<diffusion::LossBreakdown> history;
  diffusion::LossBreakdown eval0, eval1;
  double seconds = 0;
};

std::optional<DeskRun> desk;

DeskRun& desk_run() {
  if (desk) return *desk;
  const auto t0 = Clock::now();
  DeskRun d;
  d.data = testing::desk_dataset(8, 32, 7);
  d.rng_before = Rng(11);
  d.cfg.batch_size = 12;
  d.cfg.grad_accum = 4;
  d.cfg.learning_rate = 2e-4;
  d.cfg.steps = 200;
  d.cfg.resolution = 32;
  d.cfg.seed = 5;
  model::attach_lora(d.net, d.cfg.lora_rank, d.cfg.lora_alpha, &d.rng_before);
  d.initial = d.net;
  d.base_before = model::snapshot_base(d.net);
  const model::IdentityCodec codec;
  const diffusion::NoiseSchedule schedule;
  d.eval0 = diffusion::evaluate(d.net, codec, d.data.id, d.data.de, d.data.bs, schedule, 99);
  Rng rng = d.rng_before;
  d.history = diffusion::train(d.net, codec, d.data.id, d.data.de, d.data.bs, d.cfg, schedule, rng);
  d.eval1 = diffusion::evaluate(d.net, codec, d.data.id, d.data.de, d.data.bs, schedule, 99);
  d.seconds = seconds_since(t0);
  desk = std::move(d);
  return *desk;
}

// -- 4 ----------------------------------------------------------------------

Outcome loss_suite() {
  using diffusion::masked_diffusion_loss;
  model::Latent eps(4, 4, 3, 1.0), pred(4, 4, 3, 0.0);
  const Image zero(4, 4, 1, 0.0f), half(4, 4, 1, 0.5f);
  const bool zero_mask = masked_diffusion_loss(pred, eps, &zero) == 0.0;
  const bool perfect = masked_diffusion_loss(eps, eps, &half) == 0.0;
  const bool quarter = masked_diffusion_loss(pred, eps, &half) == 0.25;

  const DeskRun& d = desk_run();
  double worst = 0;
  for (std::size_t i = 0; i < 50 && i < d.history.size(); ++i) {
    const auto& h = d.history[i];
    worst = std::max(worst, std::abs(h.all - (h.id + h.de + h.bs)));
  }

  // Replay step 1 sample by sample on the initial weights.
  const model::IdentityCodec codec;
  const diffusion::NoiseSchedule schedule;
  data::BatchStream stream(d.data.id, d.data.de, d.data.bs, d.cfg.batch_size, d.cfg.seed);
  Rng replay = d.rng_before;
  double parts[3] = {0, 0, 0};
  for (int a = 0; a < d.cfg.grad_accum; ++a) {
    const data::Batch b = stream.next();
    for (std::size_t i = 0; i < b.samples.size(); ++i) {
      const int t = static_cast<int>(replay.uniform_int(1, schedule.steps()));
      const model::Latent e = diffusion::gaussian_latent(32, 32, 3, replay);
      parts[i / b.third()] +=
          diffusion::sample_loss(d.initial, codec, *b.samples[i], schedule, t, e) / (b.third() * d.cfg.grad_accum);
    }
  }
  const double replay_err = std::abs(parts[0] + parts[1] + parts[2] - d.history.front().all);
  const bool ok = zero_mask && perfect && quarter && worst <= kSumTol && replay_err <= kSumTol;
  return {ok, std::string("zero-mask ") + (zero_mask ? "0" : "!=0") + ", perfect " + (perfect ? "0" : "!=0") +
                  ", closed form " + (quarter ? "0.25" : "!=0.25") +
                  fmt(", max |L_all - sum| over 50 steps %.1e, step-1 replay %.1e (tol %.0e)", worst, replay_err,
                      kSumTol)};
}

// -- 5 ----------------------------------------------------------------------

Outcome lora_contracts() {
  model::ToyDenoiser base;
  Rng rng(1);
  const model::Latent y = diffusion::gaussian_latent(32, 32, 3, rng), x = diffusion::gaussian_latent(32, 32, 3, rng);
  const auto p = base.encode_prompt(data::prompt_text(data::PromptTag::kId));
  const model::Latent before = base.predict({&y, 321, &p, &x});
  model::attach_lora(base, 8, 8.0, &rng);
  const bool identity = base.predict({&y, 321, &p, &x}) == before;

  const DeskRun& d = desk_run();
  const bool frozen = model::snapshot_base(d.net) == d.base_before;
  int sites = 0, count_ok = 0;
  for (const auto& s : d.net.sites()) {
    if (!s.lora) continue;
    ++sites;
    const auto& l = *s.lora;
    count_ok += l.parameter_count() == model::lora_site_parameter_count(l.rank, s.out, s.in) &&
                l.a.size() == static_cast<std::size_t>(l.rank) * s.in &&
                l.b.size() == static_cast<std::size_t>(s.out) * l.rank;
  }
  const bool trained = diffusion::gather_lora(d.net) != diffusion::gather_lora(d.initial);
  return {identity && frozen && count_ok == sites && sites > 0 && trained,
          std::string("zero-init identity ") + (identity ? "bit-exact" : "differs") + ", base after 200 steps " +
              (frozen ? "bit-identical" : "changed") + fmt(", parameter count holds on %.0f/%.0f sites", count_ok, sites)};
}

// -- 6 ----------------------------------------------------------------------

Outcome gradient_check() {
  const testing::DeskData data = testing::desk_dataset(1, 16, 31);
  model::ToyDenoiser net;
  Rng rng(6);
  model::attach_lora(net, 8, 8.0, &rng);
  for (model::WeightSite* s : net.adaptable_sites())
    for (float& v : s->lora->b) v = static_cast<float>(rng.normal() * 0.05);
  const model::IdentityCodec codec;
  const diffusion::NoiseSchedule schedule;
  const data::TrainingSample& sample = data.id[0];
  const model::Latent eps = diffusion::gaussian_latent(16, 16, 3, rng);
  const int t = 400;

  std::vector<model::SiteGradient> grads;
  diffusion::sample_loss(net, codec, sample, schedule, t, eps, &grads);

  double worst = 0;
  int probes = 0;
  Rng pick(60);
  auto probe = [&](float& param, double analytic) {
    const float saved = param;
    const float up_v = static_cast<float>(saved + kGradStep), down_v = static_cast<float>(saved - kGradStep);
    param = up_v;
    const double up = diffusion::sample_loss(net, codec, sample, schedule, t, eps);
    param = down_v;
    const double down = diffusion::sample_loss(net, codec, sample, schedule, t, eps);
    param = saved;
    // Divide by the step actually representable in float32.
    const double numeric = (up - down) / (static_cast<double>(up_v) - static_cast<double>(down_v));
    const double scale = std::max({std::abs(analytic), std::abs(numeric), kGradFloor});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
    ++probes;
  };
  const auto sites = net.mutable_sites();
  for (std::size_t si = 0; si < sites.size(); ++si) {
    auto& s = sites[si];
    if (!s.lora) continue;
    for (int k = 0; k < 16; ++k) {
      const auto ia = static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(s.lora->a.size()) - 1));
      probe(s.lora->a[ia], grads[si].lora_a[ia]);
      const auto ib = static_cast<std::size_t>(pick.uniform_int(0, static_cast<std::int64_t>(s.lora->b.size()) - 1));
      probe(s.lora->b[ib], grads[si].lora_b[ib]);
    }
  }
  return {worst <= kGradRelTol, fmt("%.0f adapter entries, max relative error %.2e (tol %.0e)", probes, worst, kGradRelTol)};
}

// -- 7 ----------------------------------------------------------------------

Outcome desk_training() {
  const DeskRun& d = desk_run();
  const double drop = 1.0 - d.eval1.all / d.eval0.all;
  const double first = d.history.front().all, last = d.history.back().all;
  Outcome o{drop >= kLossDrop && d.seconds <= kBudget7,
            fmt("L_all %.4f -> %.4f, drop %.1f%%", d.eval0.all, d.eval1.all, 100 * drop) +
                fmt(" (need %.0f%%); training batches %.4f -> %.4f", 100 * kLossDrop, first, last) +
                fmt("; desk run %.0fs", d.seconds)};
  if (d.seconds > kBudget7) o.detail += " [over budget]";
  return o;
}

// -- 8 ----------------------------------------------------------------------

Outcome level_map_suite() {
  Rng rng(33);
  // (a) random captures
  double sum_err = 0;
  for (int trial = 0; trial < 25; ++trial) {
    const int g = static_cast<int>(rng.uniform_int(1, 8)), dim = static_cast<int>(rng.uniform_int(2, 32));
    levelmap::SiteCapture c{"attn", 0, g, g, {}, {}, {}, {}};
    for (auto* m : {&c.q_high, &c.k_high, &c.q_low, &c.k_low}) {
      *m = model::Matrix(g * g, dim);
      const double sd = rng.uniform(0.1, 4.0);
      for (double& v : m->data) v = rng.normal() * sd;
    }
    const auto s = levelmap::scores(std::vector<levelmap::SiteCapture>{c});
    for (int i = 0; i < g * g; ++i) sum_err = std::max(sum_err, std::abs(s.gen[i] + s.res[i] - 1.0));
  }
  // (b) isolated block vs standalone
  double iso_err = 0;
  {
    model::Matrix qh(16, 8), ql(16, 8), kh(16, 8), kl(16, 8);
    for (auto* m : {&qh, &ql, &kh, &kl})
      for (double& v : m->data) v = rng.normal();
    const auto merged = levelmap::merged_attention(qh, ql, kh, kl, true);
    const auto a = model::attention_probabilities(qh, kh), b = model::attention_probabilities(ql, kl);
    for (int i = 0; i < 16; ++i)
      for (int j = 0; j < 16; ++j) {
        iso_err = std::max(iso_err, std::abs(merged(i, j) - a(i, j)));
        iso_err = std::max(iso_err, std::abs(merged(16 + i, 16 + j) - b(i, j)));
        iso_err = std::max(iso_err, std::abs(merged(i, 16 + j)));
      }
  }
  // (c) dual inference with the trained desk adapters
  const DeskRun& d = desk_run();
  const model::IdentityCodec codec;
  const diffusion::NoiseSchedule schedule;
  levelmap::SamplerConfig sc;
  sc.seed = 4;
  const Image x = d.data.id[2].input;
  const levelmap::DualResult r = levelmap::dual_infer(d.net, codec, x, schedule, sc);
  const bool same_low = r.branches.out_low == levelmap::sample(d.net, codec, x, data::PromptTag::kLow, schedule, sc);
  const bool same_high = r.branches.out_high == levelmap::sample(d.net, codec, x, data::PromptTag::kHigh, schedule, sc);

  // (d) recompute the map from the stored Q/K with a hand-written softmax.
  const auto& caps = r.branches.captured;
  const int n = caps.front().q_high.rows, dim = caps.front().q_high.cols, g = caps.front().grid_height;
  std::vector<double> gen(n, 0.0);
  for (const auto& c : caps)
    for (int i = 0; i < n; ++i) {
      std::vector<double> logit(2 * n);
      double mx = -1e300;
      for (int j = 0; j < 2 * n; ++j) {
        const model::Matrix& k = j < n ? c.k_high : c.k_low;
        double dot = 0;
        for (int e = 0; e < dim; ++e) dot += c.q_high(i, e) * k(j % n, e);
        logit[j] = dot / std::sqrt(static_cast<double>(dim));
        mx = std::max(mx, logit[j]);
      }
      double z = 0, high = 0;
      for (int j = 0; j < 2 * n; ++j) {
        const double e = std::exp(logit[j] - mx);
        z += e;
        if (j < n) high += e;
      }
      gen[i] += high / z / static_cast<double>(caps.size());
    }
  Image grid(g, g, 1);
  for (int i = 0; i < n; ++i) grid.data()[i] = static_cast<float>(gen[i]);
  const Image want = resize_bilinear(grid, x.height(), x.width());
  double map_err = 0;
  for (std::size_t i = 0; i < want.data().size(); ++i)
    map_err = std::max(map_err, static_cast<double>(std::abs(want.data()[i] - r.map.values.data()[i])));
  double comp_err = 0;
  for (std::size_t i = 0; i < want.data().size(); ++i)
    comp_err = std::max(comp_err, static_cast<double>(std::abs(r.map.values.data()[i] + r.map.restoration.data()[i] - 1.0f)));

  const bool ok = sum_err <= kScoreSumTol && iso_err <= kIsolateTol && same_low && same_high && map_err <= kMapTol &&
                  comp_err <= kScoreSumTol;
  return {ok, fmt("(a) sum err %.1e (b) isolation err %.1e", sum_err, iso_err) +
                  std::string(" (c) branches ") + (same_low && same_high ? "bit-equal" : "differ") +
                  fmt(" (d) map recompute err %.1e, s_gen+s_res err %.1e", map_err, comp_err)};
}

// -- 9 ----------------------------------------------------------------------

bool same_sample(const data::TrainingSample& a, const data::TrainingSample& b) {
  return a.input == b.input && a.target == b.target && a.mask.values == b.mask.values && a.prompt == b.prompt &&
         a.source_index == b.source_index && a.severity == b.severity;
}

Outcome persistence() {
  testing::ScratchDir tmp("hazegen_accept");
  std::vector<std::string> problems;

  // Manifests
  const DeskRun& d = desk_run();
  for (const auto* set : {&d.data.id, &d.data.de, &d.data.bs}) {
    const fs::path p = tmp.path / "round.jsonl";
    data::write_manifest(*set, p);
    const data::Dataset back = data::read_manifest(p);
    bool ok = back.size() == set->size();
    for (std::size_t i = 0; ok && i < back.size(); ++i) ok = same_sample(back[i], (*set)[i]);
    if (!ok) problems.push_back("manifest round trip differs");
  }

  // Checkpoint
  checkpoint::save_checkpoint(d.net, diffusion::NoiseSchedule{}, tmp.path / "ckpt");
  const auto state = checkpoint::load_checkpoint(tmp.path / "ckpt");
  model::ToyDenoiser fresh(state.backbone);
  checkpoint::apply_checkpoint(state, fresh);
  if (diffusion::gather_lora(fresh) != diffusion::gather_lora(d.net)) problems.push_back("checkpoint adapters differ");
  {
    Rng rng(2);
    const model::Latent y = diffusion::gaussian_latent(32, 32, 3, rng), x = diffusion::gaussian_latent(32, 32, 3, rng);
    const auto p = fresh.encode_prompt(data::prompt_text(data::PromptTag::kHigh));
    if (!(fresh.predict({&y, 50, &p, &x}) == d.net.predict({&y, 50, &p, &x})))
      problems.push_back("reloaded model predicts differently");
  }

  // End-to-end CLI run.
  Rng rng(99);
  const fs::path clear = tmp.path / "clear", lights = tmp.path / "lights", haze = tmp.path / "haze";
  for (const auto& p : {clear, lights, haze}) fs::create_directories(p);
  for (int i = 0; i < 6; ++i) io::write_png(clear / ("c" + std::to_string(i) + ".png"), testing::synthetic_clear(48, 48, rng));
  for (int i = 0; i < 2; ++i) io::write_png(lights / ("l" + std::to_string(i) + ".png"), testing::bright_light(48, 48, rng));
  for (int i = 0; i < 6; ++i) io::write_png(haze / ("h" + std::to_string(i) + ".png"), testing::synthetic_haze(48, 48, rng));
  auto q = [](const fs::path& p) { return "'" + p.string() + "'"; };
  const fs::path bs = tmp.path / "bs", built = tmp.path / "built", run = tmp.path / "run", out = tmp.path / "out";
  const std::string steps[] = {
      "--seed 3 augment --clear " + q(clear) + " --lights " + q(lights) + " -o " + q(bs),
      "--seed 3 build --haze " + q(haze) + " -o " + q(built),
      "--seed 3 train --id " + q(built / "id.jsonl") + " --de " + q(built / "de.jsonl") + " --bs " +
          q(bs / "bs.jsonl") + " --steps 5 -o " + q(run),
      "--seed 3 infer --checkpoint " + q(run / "checkpoint") + " --image " + q(haze / "h0.png") +
          " --level both --map -o " + q(out),
  };
  for (const auto& s : steps) {
    const testing::CliResult r = testing::run_cli(s, tmp.path);
    if (r.code != 0) {
      problems.push_back("`" + s.substr(0, s.find(' ', 9)) + "` exited " + std::to_string(r.code) + ": " + r.err);
      break;
    }
  }
  const fs::path expected[] = {bs / "bs.jsonl", bs / "images" / "00005.png", bs / "config.txt",
                               built / "id.jsonl", built / "de.jsonl", built / "masks" / "00005.png",
                               built / "config.txt", run / "loss_log.csv", run / "config.txt",
                               run / "checkpoint" / "adapter.meta", run / "checkpoint" / "head.conv.lora",
                               run / "checkpoint" / "attn.q.lora", out / "out_low.png", out / "out_high.png",
                               out / "map_raw.f32", out / "map_vis.png", out / "config.txt"};
  int present = 0;
  for (const auto& p : expected) {
    if (fs::exists(p)) ++present;
    else problems.push_back("missing " + fs::relative(p, tmp.path).string());
  }
  std::string detail = fmt("manifests and checkpoint bit-exact, CLI artifacts %.0f/%.0f", present,
                           static_cast<double>(std::size(expected)));
  for (const auto& p : problems) detail += "; " + p;
  return {problems.empty(), detail};
}

}  // namespace

int main() {
  std::printf("hazegen acceptance suite\n");
  report(1, "severity statistic", severity_statistic, kBudget1);
  report(2, "compose/severity exactness", compose_exactness, kBudget2);
  report(3, "tiling oracle", tiling_oracle, kBudget3);
  // Criterion 4 triggers the shared 200-step desk run used by 4, 5, 7 and 8; its
  // runtime is budgeted under 7.
  report(4, "masked-loss suite", loss_suite, 0);
  report(5, "LoRA contracts", lora_contracts, 0);
  report(6, "gradient check", gradient_check, 0);
  report(7, "desk training", desk_training, 0);
  report(8, "dual-prompt suite", level_map_suite, kBudget8);
  report(9, "persistence and end-to-end run", persistence, kBudget9);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
