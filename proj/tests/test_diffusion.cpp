// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>
#include <omp.h>

#include <cmath>

#include "hazegen/diffusion.hpp"
#include "hazegen/error.hpp"
#include "hazegen/lora.hpp"
#include "support.hpp"

using namespace hazegen;
using namespace hazegen::diffusion;
using model::Latent;

namespace {

model::BackboneConfig small_backbone() {
  model::BackboneConfig cfg;
  cfg.hidden = 8;
  cfg.token_grid = 4;
  return cfg;
}

const testing::DeskData& small_data() {
  static const testing::DeskData d = testing::desk_dataset(4, 16, 3);
  return d;
}

}  // namespace

TEST_CASE("noise schedule matches a direct recomputation") {
  const NoiseSchedule s;
  CHECK(s.steps() == 1000);
  double ab = 1.0;
  CHECK(s.alpha_bar(0) == 1.0);
  for (int t = 1; t <= 1000; ++t) {
    const double beta = 1e-4 + (0.02 - 1e-4) * (t - 1) / 999.0;
    ab *= 1.0 - beta;
    CHECK(std::abs(s.beta(t) - beta) < 1e-12);
    CHECK(std::abs(s.alpha_bar(t) - ab) < 1e-12);
  }
  CHECK(s.beta(1) == doctest::Approx(1e-4));
  CHECK(s.beta(1000) == doctest::Approx(0.02));
  // Nearly all signal is gone at T.
  CHECK(s.alpha_bar(1000) < 1e-4);

  CHECK_THROWS_AS(s.beta(0), ConfigError);
  CHECK_THROWS_AS(s.alpha_bar(1001), ConfigError);
  CHECK_THROWS_AS(NoiseSchedule(0), ConfigError);
  CHECK_THROWS_AS(NoiseSchedule(10, 0.1, 0.05), ConfigError);
  CHECK(NoiseSchedule(1, 0.3, 0.3).alpha_bar(1) == doctest::Approx(0.7));
}

TEST_CASE("forward diffusion") {
  Rng rng(1);
  const Latent y0 = gaussian_latent(8, 8, 3, rng), eps = gaussian_latent(8, 8, 3, rng);
  CHECK(forward_diffuse(y0, 1.0, eps) == y0);
  CHECK(forward_diffuse(y0, 0.0, eps) == eps);
  const NoiseSchedule s;
  CHECK(forward_diffuse(y0, 0, eps, s) == y0);
  const Latent mid = forward_diffuse(y0, 0.36, eps);
  CHECK(mid.data[5] == doctest::Approx(0.6 * y0.data[5] + 0.8 * eps.data[5]));
  CHECK_THROWS_AS(forward_diffuse(y0, 0.5, Latent(8, 8, 1)), DataError);

  // Variance of sqrt(ab) y0 + sqrt(1-ab) eps with unit-variance inputs.
  const Latent big0 = gaussian_latent(64, 64, 3, rng), bige = gaussian_latent(64, 64, 3, rng);
  const Latent yt = forward_diffuse(big0, 500, bige, s);
  double sq = 0;
  for (double v : yt.data) sq += v * v;
  CHECK(sq / yt.data.size() == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("masked loss closed forms") {
  Latent eps(2, 2, 3, 1.0), pred(2, 2, 3, 0.0);
  CHECK(masked_diffusion_loss(eps, eps, nullptr) == 0.0);
  CHECK(masked_diffusion_loss(pred, eps, nullptr) == 1.0);
  const Image zero(2, 2, 1, 0.0f), half(2, 2, 1, 0.5f);
  CHECK(masked_diffusion_loss(pred, eps, &zero) == 0.0);
  CHECK(masked_diffusion_loss(pred, eps, &half) == doctest::Approx(0.25));

  // Mask broadcasts over channels: one live pixel of four.
  Image one(2, 2, 1, 0.0f);
  one.at(1, 0) = 1.0f;
  CHECK(masked_diffusion_loss(pred, eps, &one) == doctest::Approx(0.25));
  const Image rgb(2, 2, 3);
  CHECK_THROWS_AS(masked_diffusion_loss(pred, eps, &rgb), DataError);
}

TEST_CASE("masked loss gradient matches finite differences") {
  Rng rng(2);
  const Latent eps = gaussian_latent(3, 4, 2, rng);
  Latent pred = gaussian_latent(3, 4, 2, rng);
  Image mask(3, 4, 1);
  for (float& v : mask.data()) v = static_cast<float>(rng.uniform());
  const Latent g = masked_diffusion_loss_grad(pred, eps, &mask, 1.7);
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double saved = pred.data[i], h = 1e-6;
    pred.data[i] = saved + h;
    const double up = masked_diffusion_loss(pred, eps, &mask);
    pred.data[i] = saved - h;
    const double down = masked_diffusion_loss(pred, eps, &mask);
    pred.data[i] = saved;
    CHECK(g.data[i] == doctest::Approx(1.7 * (up - down) / (2 * h)).epsilon(1e-6));
  }
}

TEST_CASE("balanced batch checks") {
  const auto& d = small_data();
  data::Batch ok{{&d.id[0], &d.id[1], &d.de[1], &d.de[0], &d.bs[2], &d.bs[3]}};
  CHECK_NOTHROW(check_balanced(ok));
  CHECK_THROWS_AS(check_balanced(data::Batch{{&d.id[0], &d.de[0]}}), ConfigError);
  CHECK_THROWS_AS(check_balanced(data::Batch{}), ConfigError);
  CHECK_THROWS_AS(check_balanced(data::Batch{{&d.id[0], &d.de[1], &d.bs[0]}}), ConfigError);
  CHECK_THROWS_AS(check_balanced(data::Batch{{&d.de[0], &d.id[0], &d.bs[0]}}), ConfigError);
  CHECK_THROWS_AS(check_balanced(data::Batch{{&d.id[0], &d.de[0], &d.id[1]}}), ConfigError);
}

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 10;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.grad_accum = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.learning_rate = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);

  KeyValues kv = KeyValues::parse("steps = 7\nlearning_rate = 1e-3\n");
  const TrainConfig parsed = TrainConfig::from_config(kv);
  CHECK(parsed.steps == 7);
  CHECK(parsed.learning_rate == 1e-3);
  CHECK(parsed.batch_size == 12);
}

TEST_CASE("train_step loss is the sum of per-third means") {
  const auto& d = small_data();
  model::ToyDenoiser net(small_backbone());
  Rng init(4);
  model::attach_lora(net, 2, 2.0, &init);
  const model::IdentityCodec codec;
  const NoiseSchedule schedule;
  data::BatchStream stream(d.id, d.de, d.bs, 6, 9);
  const std::vector<data::Batch> micro = {stream.next(), stream.next()};

  // Replay the (t, eps) draws in job order on the pre-update weights.
  Rng rng(77), replay(77);
  double want[3] = {0, 0, 0};
  for (const auto& b : micro)
    for (std::size_t i = 0; i < b.samples.size(); ++i) {
      const auto* s = b.samples[i];
      const int t = static_cast<int>(replay.uniform_int(1, schedule.steps()));
      const Latent eps = gaussian_latent(16, 16, 3, replay);
      want[i / b.third()] += sample_loss(net, codec, *s, schedule, t, eps) / (b.third() * 2.0);
    }

  AdamState adam;
  const LossBreakdown got = train_step(net, codec, micro, schedule, adam, rng);
  CHECK(got.id == doctest::Approx(want[0]).epsilon(1e-12));
  CHECK(got.de == doctest::Approx(want[1]).epsilon(1e-12));
  CHECK(got.bs == doctest::Approx(want[2]).epsilon(1e-12));
  CHECK(got.all == got.id + got.de + got.bs);
  CHECK(adam.step == 1);
}

TEST_CASE("first Adam step moves each live parameter by the learning rate") {
  const auto& d = small_data();
  model::ToyDenoiser net(small_backbone());
  Rng rng(5);
  model::attach_lora(net, 2, 2.0, &rng);
  const std::vector<double> before = gather_lora(net);
  const model::IdentityCodec codec;
  data::BatchStream stream(d.id, d.de, d.bs, 3, 1);
  const std::vector<data::Batch> micro = {stream.next()};
  AdamState adam;
  adam.learning_rate = 1e-3;
  train_step(net, codec, micro, NoiseSchedule{}, adam, rng);
  const std::vector<double> after = gather_lora(net);

  // B = 0 at init, so A receives no gradient on the first step while B moves
  // by lr * g / (|g| + eps).
  std::size_t idx = 0, moved = 0;
  for (const auto& s : net.sites()) {
    if (!s.lora) continue;
    for (std::size_t i = 0; i < s.lora->a.size(); ++i, ++idx) CHECK(after[idx] == before[idx]);
    for (std::size_t i = 0; i < s.lora->b.size(); ++i, ++idx) {
      const double step = std::abs(after[idx] - before[idx]);
      if (step == 0.0) continue;
      ++moved;
      CHECK(step == doctest::Approx(1e-3).epsilon(1e-3));
    }
  }
  CHECK(moved > idx / 4);
}

TEST_CASE("training freezes the base and is reproducible") {
  const auto& d = small_data();
  const model::IdentityCodec codec;
  const NoiseSchedule schedule;
  TrainConfig cfg;
  cfg.batch_size = 6;
  cfg.grad_accum = 2;
  cfg.steps = 3;
  cfg.learning_rate = 1e-3;
  cfg.seed = 8;

  auto run = [&](int threads, std::vector<double>* params) {
    const int saved = omp_get_max_threads();
    omp_set_num_threads(threads);
    model::ToyDenoiser net(small_backbone());
    Rng rng(6);
    model::attach_lora(net, 2, 2.0, &rng);
    const auto base = model::snapshot_base(net);
    const auto lora0 = gather_lora(net);
    int calls = 0;
    const auto hist = train(net, codec, d.id, d.de, d.bs, cfg, schedule, rng,
                            [&](int step, const LossBreakdown&) { CHECK(step == ++calls); });
    omp_set_num_threads(saved);
    CHECK(calls == 3);
    CHECK(model::snapshot_base(net) == base);
    CHECK(gather_lora(net) != lora0);
    *params = gather_lora(net);
    return hist;
  };
  std::vector<double> p1, p2;
  const auto h1 = run(1, &p1);
  const auto h2 = run(2, &p2);
  REQUIRE(h1.size() == 3);
  for (std::size_t i = 0; i < h1.size(); ++i) {
    CHECK(h1[i].all == h2[i].all);
    CHECK(h1[i].all == h1[i].id + h1[i].de + h1[i].bs);
  }
  CHECK(p1 == p2);

  model::ToyDenoiser bare(small_backbone());
  Rng rng(1);
  CHECK_THROWS_AS(train(bare, codec, d.id, d.de, d.bs, cfg, schedule, rng), ConfigError);
}

TEST_CASE("evaluate is deterministic and sums its parts") {
  const auto& d = small_data();
  model::ToyDenoiser net(small_backbone());
  const model::IdentityCodec codec;
  const NoiseSchedule schedule;
  const LossBreakdown a = evaluate(net, codec, d.id, d.de, d.bs, schedule, 3, 2);
  const LossBreakdown b = evaluate(net, codec, d.id, d.de, d.bs, schedule, 3, 2);
  CHECK(a.all == b.all);
  CHECK(a.all == a.id + a.de + a.bs);
  CHECK(a.all > 0);
  CHECK(evaluate(net, codec, d.id, d.de, d.bs, schedule, 4, 2).all != a.all);
}

TEST_CASE("masked samples need a full-resolution codec") {
  const auto& d = small_data();
  model::ToyDenoiser net(small_backbone());
  const model::DownsampleCodec codec;
  Rng rng(1);
  const Latent eps = gaussian_latent(8, 8, 3, rng);
  CHECK_THROWS_AS(sample_loss(net, codec, d.id[0], NoiseSchedule{}, 10, eps), ConfigError);
  CHECK(sample_loss(net, codec, d.bs[0], NoiseSchedule{}, 10, eps) > 0);
}
