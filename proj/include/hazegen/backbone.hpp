// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hazegen/config.hpp"
#include "hazegen/image.hpp"
#include "hazegen/lora.hpp"

namespace hazegen::model {

/// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c, double fill = 0.0)
      : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, fill) {}
  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  bool operator==(const Matrix&) const = default;
};

/// Channels-last latent grid.
struct Latent {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Latent() = default;
  Latent(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {}
  bool same_shape(const Latent& o) const {
    return height == o.height && width == o.width && channels == o.channels;
  }
  bool operator==(const Latent&) const = default;
};

/// Text conditioning: `tokens` rows of `dim` features.
struct PromptEmbedding {
  Matrix tokens;
};

/// Deterministic stand-in for a text encoder. Each whitespace token is hashed
/// (FNV-1a) to seed a generator that emits one standard-normal row; the
/// result is zero-padded or truncated to `tokens` rows.
PromptEmbedding embed_prompt(std::string_view text, int tokens = 8, int dim = 32);

/// Maps images to the space the denoiser works in.
class LatentCodec {
 public:
  virtual ~LatentCodec() = default;
  virtual Latent encode(const Image& img) const = 0;
  virtual Image decode(const Latent& z) const = 0;
  /// Spatial downsampling factor.
  virtual int factor() const = 0;
};

/// Latent = image, exactly.
class IdentityCodec final : public LatentCodec {
 public:
  Latent encode(const Image& img) const override;
  Image decode(const Latent& z) const override;
  int factor() const override { return 1; }
};

/// 2x2 average pooling / nearest upsampling. Exercises the codec contract
/// with a non-trivial factor; round trip is exact only on 2x2-constant images.
class DownsampleCodec final : public LatentCodec {
 public:
  Latent encode(const Image& img) const override;
  Image decode(const Latent& z) const override;
  int factor() const override { return 2; }
};

/// Query/key pair recorded at one attention site during a forward pass.
struct CapturedAttention {
  std::string site;
  int grid_height = 0;
  int grid_width = 0;
  Matrix queries;
  Matrix keys;
};

struct AttentionCapture {
  std::vector<CapturedAttention> records;
};

struct DenoiserInput {
  const Latent* noisy = nullptr;      // y_t
  int timestep = 0;
  const PromptEmbedding* prompt = nullptr;
  const Latent* condition = nullptr;  // latent of the hazy input
};

/// Gradient of one site; entries are empty when not requested.
struct SiteGradient {
  std::vector<double> weight;
  std::vector<double> bias;
  std::vector<double> lora_a;
  std::vector<double> lora_b;
};

/// Given the prediction, returns dLoss/dPrediction.
using UpstreamGradient = std::function<Latent(const Latent& prediction)>;

/// Noise-prediction network contract shared by the toy backbone and any
/// external model adapter.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual Latent predict(const DenoiserInput& in, AttentionCapture* capture = nullptr) const = 0;

  /// Runs two inputs whose designated self-attention site sees both token
  /// sets merged. With `isolate` set the cross-branch logits are masked out,
  /// which makes each output equal to an independent `predict`.
  virtual std::pair<Latent, Latent> predict_pair(const DenoiserInput& first,
                                                 const DenoiserInput& second, bool isolate,
                                                 AttentionCapture* capture_first,
                                                 AttentionCapture* capture_second) const;

  /// Forward plus reverse pass. Fills one SiteGradient per site: adapter
  /// gradients always, base weight gradients when `base_grads` is set.
  virtual Latent predict_backprop(const DenoiserInput& in, const UpstreamGradient& upstream,
                                  std::vector<SiteGradient>& grads, bool base_grads) const = 0;

  virtual std::vector<std::string> attention_sites() const = 0;

  /// Text conditioning in the width this backbone expects.
  virtual PromptEmbedding encode_prompt(std::string_view text) const = 0;

  virtual std::span<const WeightSite> sites() const = 0;
  virtual std::span<WeightSite> mutable_sites() = 0;
  std::vector<WeightSite*> adaptable_sites();

  /// Fingerprint of the architecture and base weights; adapters are
  /// checkpointed against it.
  virtual std::uint64_t base_fingerprint() const = 0;
};

struct BackboneConfig {
  int channels = 3;       // latent channels
  int hidden = 32;        // feature width
  int prompt_tokens = 8;
  int prompt_dim = 32;
  int token_grid = 8;     // self-attention runs on a token_grid^2 pooled grid
  std::uint64_t seed = 1234;

  void validate() const;
  static BackboneConfig from_config(KeyValues& kv, const std::string& prefix = "");
  std::string to_text() const;
  bool operator==(const BackboneConfig&) const = default;
};

/// Small conditional denoiser:
///   stem conv over [y_t | x] -> residual conv block (+ timestep embedding)
///   -> self-attention over pooled tokens -> cross-attention to the prompt
///   -> residual conv block -> head (silu, 3x3 conv, silu, 1x1 projection to C).
/// The self-attention site "attn" is the capture site for level maps.
class ToyDenoiser final : public Denoiser {
 public:
  explicit ToyDenoiser(const BackboneConfig& cfg = {});

  const BackboneConfig& config() const { return cfg_; }

  Latent predict(const DenoiserInput& in, AttentionCapture* capture = nullptr) const override;
  std::pair<Latent, Latent> predict_pair(const DenoiserInput& first, const DenoiserInput& second,
                                         bool isolate, AttentionCapture* capture_first,
                                         AttentionCapture* capture_second) const override;
  Latent predict_backprop(const DenoiserInput& in, const UpstreamGradient& upstream,
                          std::vector<SiteGradient>& grads, bool base_grads) const override;

  std::vector<std::string> attention_sites() const override { return {"attn"}; }
  PromptEmbedding encode_prompt(std::string_view text) const override {
    return embed_prompt(text, cfg_.prompt_tokens, cfg_.prompt_dim);
  }
  std::span<const WeightSite> sites() const override { return sites_; }
  std::span<WeightSite> mutable_sites() override { return sites_; }
  std::uint64_t base_fingerprint() const override;

  /// Zero every base weight and bias (used by tests).
  void zero_base();

  enum Site : int {
    kStem, kTemb1, kConv1, kAttnQ, kAttnK, kAttnV, kAttnO,
    kCrossQ, kCrossK, kCrossV, kCrossO, kTemb2, kConv2, kHeadHidden, kHeadOut, kSiteCount
  };

  struct Workspace;

 private:
  void check_input(const DenoiserInput& in) const;

  BackboneConfig cfg_;
  std::vector<WeightSite> sites_;
};

/// Row-softmax of q * k^T / sqrt(d). When `block` > 0, rows and columns are
/// split into consecutive groups of `block` and logits across groups are set
/// to -infinity before normalising.
Matrix attention_probabilities(const Matrix& q, const Matrix& k, int block = 0);

/// Sinusoidal timestep features of the given (even) width.
std::vector<double> timestep_embedding(int t, int width);

Latent latent_from_image(const Image& img);
Image image_from_latent(const Latent& z);

}  // namespace hazegen::model
