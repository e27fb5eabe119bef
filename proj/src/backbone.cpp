// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hazegen/backbone.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "hazegen/error.hpp"
#include "hazegen/kernels.hpp"
#include "hazegen/rng.hpp"

namespace hazegen::model {
namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double silu(double x) { return x * sigmoid(x); }
double silu_grad(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

Matrix linear(const Matrix& x, const std::vector<double>& w, const std::vector<double>& b, int out) {
  Matrix y(x.rows, out);
  kernels::matmul_nt(x.data, w, b, y.data, x.rows, x.cols, out);
  return y;
}

/// dx = dy * w.
Matrix linear_grad_input(const Matrix& dy, const std::vector<double>& w, int in) {
  Matrix dx(dy.rows, in);
  kernels::matmul_nn(dy.data, w, dx.data, dy.rows, dy.cols, in);
  return dx;
}

/// dw = dy^T * x, db = column sums of dy.
void linear_grad_params(const Matrix& x, const Matrix& dy, std::vector<double>& dw,
                        std::vector<double>* db) {
  dw.assign(static_cast<std::size_t>(dy.cols) * x.cols, 0.0);
  kernels::matmul_tn(dy.data, x.data, dw, dy.rows, dy.cols, x.cols);
  if (db) {
    db->assign(dy.cols, 0.0);
    for (int i = 0; i < dy.rows; ++i)
      for (int j = 0; j < dy.cols; ++j) (*db)[j] += dy(i, j);
  }
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix y(a.rows, b.cols);
  kernels::matmul_nn(a.data, b.data, y.data, a.rows, a.cols, b.cols);
  return y;
}

void add_in_place(Matrix& a, const Matrix& b) {
  for (std::size_t i = 0; i < a.data.size(); ++i) a.data[i] += b.data[i];
}

struct AttentionGrads {
  Matrix dq, dk, dv;
};

/// Reverse pass of out = softmax(q k^T / sqrt(d)) v given probabilities p.
AttentionGrads attention_backward(const Matrix& dout, const Matrix& p, const Matrix& q,
                                  const Matrix& k, const Matrix& v) {
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols));
  Matrix dp(p.rows, p.cols);
  kernels::matmul_nt(dout.data, v.data, {}, dp.data, dout.rows, dout.cols, v.rows);
  AttentionGrads g{Matrix(q.rows, q.cols), Matrix(k.rows, k.cols), Matrix(v.rows, v.cols)};
  kernels::matmul_tn(p.data, dout.data, g.dv.data, p.rows, p.cols, dout.cols);
  Matrix dl(p.rows, p.cols);
  for (int i = 0; i < p.rows; ++i) {
    double dot = 0.0;
    for (int j = 0; j < p.cols; ++j) dot += dp(i, j) * p(i, j);
    for (int j = 0; j < p.cols; ++j) dl(i, j) = p(i, j) * (dp(i, j) - dot) * scale;
  }
  kernels::matmul_nn(dl.data, k.data, g.dq.data, dl.rows, dl.cols, k.cols);
  kernels::matmul_tn(dl.data, q.data, g.dk.data, dl.rows, dl.cols, q.cols);
  return g;
}

}  // namespace

// ---------------------------------------------------------------------------
// Prompt embedding, codecs, helpers

PromptEmbedding embed_prompt(std::string_view text, int tokens, int dim) {
  PromptEmbedding e{Matrix(tokens, dim)};
  std::istringstream in{std::string(text)};
  std::string word;
  int row = 0;
  while (row < tokens && in >> word) {
    Rng rng(fnv1a64(word));
    for (int c = 0; c < dim; ++c) e.tokens(row, c) = rng.normal();
    ++row;
  }
  return e;
}

Latent latent_from_image(const Image& img) {
  Latent z(img.height(), img.width(), img.channels());
  std::copy(img.data().begin(), img.data().end(), z.data.begin());
  return z;
}

Image image_from_latent(const Latent& z) {
  Image img(z.height, z.width, z.channels);
  for (std::size_t i = 0; i < z.data.size(); ++i) img.data()[i] = static_cast<float>(z.data[i]);
  return img;
}

Latent IdentityCodec::encode(const Image& img) const { return latent_from_image(img); }
Image IdentityCodec::decode(const Latent& z) const { return image_from_latent(z); }

Latent DownsampleCodec::encode(const Image& img) const {
  if (img.height() % 2 || img.width() % 2) throw DataError("DownsampleCodec needs even dimensions");
  Latent z(img.height() / 2, img.width() / 2, img.channels());
  for (int y = 0; y < z.height; ++y)
    for (int x = 0; x < z.width; ++x)
      for (int c = 0; c < z.channels; ++c) {
        const double s = img.at(2 * y, 2 * x, c) + img.at(2 * y, 2 * x + 1, c) +
                         img.at(2 * y + 1, 2 * x, c) + img.at(2 * y + 1, 2 * x + 1, c);
        z.data[(static_cast<std::size_t>(y) * z.width + x) * z.channels + c] = s / 4.0;
      }
  return z;
}

Image DownsampleCodec::decode(const Latent& z) const {
  Image img(z.height * 2, z.width * 2, z.channels);
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < z.channels; ++c)
        img.at(y, x, c) = static_cast<float>(
            z.data[(static_cast<std::size_t>(y / 2) * z.width + x / 2) * z.channels + c]);
  return img;
}

std::vector<double> timestep_embedding(int t, int width) {
  std::vector<double> e(width, 0.0);
  const int half = width / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::exp(-std::log(10000.0) * i / half);
    e[i] = std::sin(t * freq);
    e[half + i] = std::cos(t * freq);
  }
  return e;
}

Matrix attention_probabilities(const Matrix& q, const Matrix& k, int block) {
  if (q.cols != k.cols) throw DataError("attention: query and key widths differ");
  const double scale = 1.0 / std::sqrt(static_cast<double>(q.cols));
  Matrix p(q.rows, k.rows);
  kernels::matmul_nt(q.data, k.data, {}, p.data, q.rows, q.cols, k.rows);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < p.rows; ++i) {
    double mx = kNegInf;
    for (int j = 0; j < p.cols; ++j) {
      double& l = p(i, j);
      l = (block > 0 && i / block != j / block) ? kNegInf : l * scale;
      mx = std::max(mx, l);
    }
    double sum = 0.0;
    for (int j = 0; j < p.cols; ++j) sum += p(i, j) = std::exp(p(i, j) - mx);
    for (int j = 0; j < p.cols; ++j) p(i, j) /= sum;
  }
  return p;
}

std::vector<WeightSite*> Denoiser::adaptable_sites() {
  std::vector<WeightSite*> out;
  for (WeightSite& s : mutable_sites())
    if (s.adaptable) out.push_back(&s);
  return out;
}

std::pair<Latent, Latent> Denoiser::predict_pair(const DenoiserInput& first,
                                                 const DenoiserInput& second, bool isolate,
                                                 AttentionCapture* capture_first,
                                                 AttentionCapture* capture_second) const {
  if (!isolate) throw ConfigError("this backbone only supports isolated paired inference");
  return {predict(first, capture_first), predict(second, capture_second)};
}

// ---------------------------------------------------------------------------
// Configuration

void BackboneConfig::validate() const {
  if (channels < 1 || hidden < 2 || hidden % 2 || prompt_tokens < 1 || prompt_dim < 1 ||
      token_grid < 1)
    throw ConfigError("invalid backbone configuration");
}

BackboneConfig BackboneConfig::from_config(KeyValues& kv, const std::string& prefix) {
  BackboneConfig c;
  c.channels = static_cast<int>(kv.get_int(prefix + "channels", c.channels));
  c.hidden = static_cast<int>(kv.get_int(prefix + "hidden", c.hidden));
  c.prompt_tokens = static_cast<int>(kv.get_int(prefix + "prompt_tokens", c.prompt_tokens));
  c.prompt_dim = static_cast<int>(kv.get_int(prefix + "prompt_dim", c.prompt_dim));
  c.token_grid = static_cast<int>(kv.get_int(prefix + "token_grid", c.token_grid));
  c.seed = static_cast<std::uint64_t>(kv.get_int(prefix + "seed", static_cast<std::int64_t>(c.seed)));
  c.validate();
  return c;
}

std::string BackboneConfig::to_text() const {
  std::ostringstream os;
  os << "channels = " << channels << "\nhidden = " << hidden << "\nprompt_tokens = " << prompt_tokens
     << "\nprompt_dim = " << prompt_dim << "\ntoken_grid = " << token_grid << "\nseed = " << seed
     << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Toy denoiser

namespace {

struct Weights {
  std::array<std::vector<double>, ToyDenoiser::kSiteCount> w;
  std::array<std::vector<double>, ToyDenoiser::kSiteCount> b;
};

Weights effective(std::span<const WeightSite> sites) {
  Weights out;
  for (std::size_t i = 0; i < sites.size(); ++i) {
    out.w[i] = sites[i].effective_weight();
    out.b[i] = sites[i].bias_as_double();
  }
  return out;
}

}  // namespace

struct ToyDenoiser::Workspace {
  int height = 0, width = 0, hidden = 0, channels = 0, tokens = 0;
  std::vector<int> cell;       // pixel -> token
  std::vector<int> cell_size;  // pixels per token
  std::vector<double> temb;
  const Matrix* prompt = nullptr;

  Matrix h0, h1, e1, u1, a1, h2;
  Matrix t, q, k, v, p, attended, s, t2;
  Matrix qc, kc, vc, pc, attended_c, cx;
  Matrix h3, e2, u2, a2, h4, z, pre, act, out;

  kernels::ConvShape conv(int in_c, int out_c) const { return {height, width, in_c, out_c}; }
};

namespace {

using Workspace = ToyDenoiser::Workspace;
using S = ToyDenoiser::Site;

Matrix conv(const Workspace& ws, const Matrix& x, const Weights& wt, int site, int out_c) {
  Matrix y(x.rows, out_c);
  kernels::conv3x3(x.data, wt.w[site], wt.b[site], y.data, ws.conv(x.cols, out_c));
  return y;
}

/// u = h + e (broadcast), a = silu(u), out = h + conv(a).
void residual_block(Workspace& ws, const Weights& wt, int temb_site, int conv_site, const Matrix& h,
                    Matrix& e, Matrix& u, Matrix& a, Matrix& out) {
  Matrix temb(1, ws.hidden);
  temb.data = ws.temb;
  e = linear(temb, wt.w[temb_site], wt.b[temb_site], ws.hidden);
  u = h;
  for (int i = 0; i < u.rows; ++i)
    for (int c = 0; c < u.cols; ++c) u(i, c) += e(0, c);
  a = u;
  for (double& v : a.data) v = silu(v);
  out = conv(ws, a, wt, conv_site, ws.hidden);
  add_in_place(out, h);
}

/// Everything up to the self-attention logits.
void forward_front(Workspace& ws, const Weights& wt, const BackboneConfig& cfg,
                   const DenoiserInput& in) {
  const Latent& y = *in.noisy;
  const Latent& x = *in.condition;
  ws.height = y.height;
  ws.width = y.width;
  ws.channels = y.channels;
  ws.hidden = cfg.hidden;
  const int g = cfg.token_grid;
  ws.tokens = g * g;
  const int pixels = y.height * y.width;

  ws.cell.resize(pixels);
  ws.cell_size.assign(ws.tokens, 0);
  for (int r = 0; r < y.height; ++r)
    for (int c = 0; c < y.width; ++c) {
      const int token = (r * g / y.height) * g + (c * g / y.width);
      ws.cell[r * y.width + c] = token;
      ++ws.cell_size[token];
    }
  ws.temb = timestep_embedding(in.timestep, cfg.hidden);
  ws.prompt = &in.prompt->tokens;

  ws.h0 = Matrix(pixels, 2 * ws.channels);
  for (int p = 0; p < pixels; ++p)
    for (int c = 0; c < ws.channels; ++c) {
      ws.h0(p, c) = y.data[static_cast<std::size_t>(p) * ws.channels + c];
      ws.h0(p, ws.channels + c) = x.data[static_cast<std::size_t>(p) * ws.channels + c];
    }
  ws.h1 = conv(ws, ws.h0, wt, S::kStem, ws.hidden);
  residual_block(ws, wt, S::kTemb1, S::kConv1, ws.h1, ws.e1, ws.u1, ws.a1, ws.h2);

  ws.t = Matrix(ws.tokens, ws.hidden);
  for (int p = 0; p < pixels; ++p)
    for (int c = 0; c < ws.hidden; ++c) ws.t(ws.cell[p], c) += ws.h2(p, c);
  for (int tok = 0; tok < ws.tokens; ++tok)
    for (int c = 0; c < ws.hidden; ++c) ws.t(tok, c) /= ws.cell_size[tok];

  ws.q = linear(ws.t, wt.w[S::kAttnQ], {}, ws.hidden);
  ws.k = linear(ws.t, wt.w[S::kAttnK], {}, ws.hidden);
  ws.v = linear(ws.t, wt.w[S::kAttnV], {}, ws.hidden);
}

/// Everything after the self-attention mixing; expects ws.attended = P V.
void forward_back(Workspace& ws, const Weights& wt, const BackboneConfig& cfg) {
  const Matrix& prompt = *ws.prompt;
  ws.s = linear(ws.attended, wt.w[S::kAttnO], {}, ws.hidden);
  ws.t2 = ws.t;
  add_in_place(ws.t2, ws.s);

  ws.qc = linear(ws.t2, wt.w[S::kCrossQ], {}, ws.hidden);
  ws.kc = linear(prompt, wt.w[S::kCrossK], {}, ws.hidden);
  ws.vc = linear(prompt, wt.w[S::kCrossV], {}, ws.hidden);
  ws.pc = attention_probabilities(ws.qc, ws.kc);
  ws.attended_c = matmul(ws.pc, ws.vc);
  ws.cx = linear(ws.attended_c, wt.w[S::kCrossO], {}, ws.hidden);

  ws.h3 = ws.h2;
  for (int p = 0; p < ws.h3.rows; ++p) {
    const int tok = ws.cell[p];
    for (int c = 0; c < ws.hidden; ++c) ws.h3(p, c) += ws.s(tok, c) + ws.cx(tok, c);
  }
  residual_block(ws, wt, S::kTemb2, S::kConv2, ws.h3, ws.e2, ws.u2, ws.a2, ws.h4);

  ws.z = ws.h4;
  for (double& v : ws.z.data) v = silu(v);
  ws.pre = conv(ws, ws.z, wt, S::kHeadHidden, ws.hidden);
  ws.act = ws.pre;
  for (double& v : ws.act.data) v = silu(v);
  ws.out = linear(ws.act, wt.w[S::kHeadOut], wt.b[S::kHeadOut], cfg.channels);
}

Latent to_latent(const Workspace& ws) {
  Latent out(ws.height, ws.width, ws.channels);
  out.data = ws.out.data;
  return out;
}

void record(AttentionCapture* capture, const Workspace& ws, int grid) {
  if (!capture) return;
  capture->records.push_back({"attn", grid, grid, ws.q, ws.k});
}

/// Reverse of residual_block; returns dL/dh and writes parameter gradients.
Matrix residual_block_backward(const Workspace& ws, const Weights& wt, int temb_site, int conv_site,
                               const Matrix& dout, const Matrix& u, const Matrix& a,
                               std::vector<SiteGradient>& grads, bool base_grads) {
  Matrix da(dout.rows, dout.cols);
  kernels::conv3x3_grad_input(dout.data, wt.w[conv_site], da.data, ws.conv(ws.hidden, ws.hidden));
  if (base_grads) {
    auto& g = grads[conv_site];
    g.weight.assign(wt.w[conv_site].size(), 0.0);
    g.bias.assign(ws.hidden, 0.0);
    kernels::conv3x3_grad_weight(a.data, dout.data, g.weight, g.bias, ws.conv(ws.hidden, ws.hidden));
  }
  Matrix dh = dout;
  Matrix de(1, ws.hidden);
  for (int p = 0; p < da.rows; ++p)
    for (int c = 0; c < ws.hidden; ++c) {
      const double du = da(p, c) * silu_grad(u(p, c));
      dh(p, c) += du;
      de(0, c) += du;
    }
  if (base_grads) {
    Matrix temb(1, ws.hidden);
    temb.data = ws.temb;
    linear_grad_params(temb, de, grads[temb_site].weight, &grads[temb_site].bias);
  }
  return dh;
}

}  // namespace

ToyDenoiser::ToyDenoiser(const BackboneConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  const int f = cfg_.hidden, c = cfg_.channels, d = cfg_.prompt_dim;
  struct Spec {
    const char* name;
    int out, in;
    bool bias, adaptable;
  };
  const Spec specs[kSiteCount] = {
      {"stem", f, 9 * 2 * c, true, false},  {"block1.temb", f, f, true, false},
      {"block1.conv", f, 9 * f, true, false}, {"attn.q", f, f, false, true},
      {"attn.k", f, f, false, true},        {"attn.v", f, f, false, true},
      {"attn.o", f, f, false, true},        {"xattn.q", f, f, false, true},
      {"xattn.k", f, d, false, true},       {"xattn.v", f, d, false, true},
      {"xattn.o", f, f, false, true},       {"block2.temb", f, f, true, false},
      {"block2.conv", f, 9 * f, true, false}, {"head.conv", f, 9 * f, true, true},
      {"head.out", c, f, true, false},
  };
  Rng rng(cfg_.seed);
  for (const Spec& s : specs) {
    WeightSite site;
    site.name = s.name;
    site.out = s.out;
    site.in = s.in;
    site.adaptable = s.adaptable;
    const double sd = 1.0 / std::sqrt(static_cast<double>(s.in));
    site.weight.resize(static_cast<std::size_t>(s.out) * s.in);
    for (float& v : site.weight) v = static_cast<float>(rng.normal() * sd);
    if (s.bias) site.bias.assign(s.out, 0.0f);
    sites_.push_back(std::move(site));
  }
}

void ToyDenoiser::zero_base() {
  for (WeightSite& s : sites_) {
    std::fill(s.weight.begin(), s.weight.end(), 0.0f);
    std::fill(s.bias.begin(), s.bias.end(), 0.0f);
  }
}

std::uint64_t ToyDenoiser::base_fingerprint() const {
  std::uint64_t h = fnv1a64("toy-denoiser\n" + cfg_.to_text());
  for (const WeightSite& s : sites_) {
    h = fnv1a64(s.name, h);
    h = fnv1a64(s.weight.data(), s.weight.size() * sizeof(float), h);
    h = fnv1a64(s.bias.data(), s.bias.size() * sizeof(float), h);
  }
  return h;
}

void ToyDenoiser::check_input(const DenoiserInput& in) const {
  if (!in.noisy || !in.condition || !in.prompt) throw DataError("denoiser input is incomplete");
  const Latent& y = *in.noisy;
  if (!y.same_shape(*in.condition)) throw DataError("noisy latent and condition differ in shape");
  if (y.channels != cfg_.channels)
    throw DataError("latent has " + std::to_string(y.channels) + " channels, backbone expects " +
                    std::to_string(cfg_.channels));
  if (y.height < cfg_.token_grid || y.width < cfg_.token_grid)
    throw DataError("latent is smaller than the attention token grid");
  if (in.prompt->tokens.cols != cfg_.prompt_dim || in.prompt->tokens.rows != cfg_.prompt_tokens)
    throw DataError("prompt embedding has the wrong shape");
}

Latent ToyDenoiser::predict(const DenoiserInput& in, AttentionCapture* capture) const {
  check_input(in);
  const Weights wt = effective(sites_);
  Workspace ws;
  forward_front(ws, wt, cfg_, in);
  ws.p = attention_probabilities(ws.q, ws.k);
  ws.attended = matmul(ws.p, ws.v);
  record(capture, ws, cfg_.token_grid);
  forward_back(ws, wt, cfg_);
  return to_latent(ws);
}

std::pair<Latent, Latent> ToyDenoiser::predict_pair(const DenoiserInput& first,
                                                    const DenoiserInput& second, bool isolate,
                                                    AttentionCapture* capture_first,
                                                    AttentionCapture* capture_second) const {
  check_input(first);
  check_input(second);
  if (!first.noisy->same_shape(*second.noisy)) throw DataError("paired inputs differ in shape");
  const Weights wt = effective(sites_);
  Workspace a, b;
  forward_front(a, wt, cfg_, first);
  forward_front(b, wt, cfg_, second);

  // Merge the two token sets: [first; second].
  const int n = a.tokens;
  auto stack = [](const Matrix& top, const Matrix& bottom) {
    Matrix m(top.rows + bottom.rows, top.cols);
    std::copy(top.data.begin(), top.data.end(), m.data.begin());
    std::copy(bottom.data.begin(), bottom.data.end(), m.data.begin() + static_cast<std::ptrdiff_t>(top.data.size()));
    return m;
  };
  const Matrix q = stack(a.q, b.q), k = stack(a.k, b.k), v = stack(a.v, b.v);
  const Matrix p = attention_probabilities(q, k, isolate ? n : 0);
  const Matrix mixed = matmul(p, v);
  a.attended = Matrix(n, cfg_.hidden);
  b.attended = Matrix(n, cfg_.hidden);
  const auto half = static_cast<std::ptrdiff_t>(a.attended.data.size());
  std::copy(mixed.data.begin(), mixed.data.begin() + half, a.attended.data.begin());
  std::copy(mixed.data.begin() + half, mixed.data.end(), b.attended.data.begin());

  record(capture_first, a, cfg_.token_grid);
  record(capture_second, b, cfg_.token_grid);
  forward_back(a, wt, cfg_);
  forward_back(b, wt, cfg_);
  return {to_latent(a), to_latent(b)};
}

Latent ToyDenoiser::predict_backprop(const DenoiserInput& in, const UpstreamGradient& upstream,
                                     std::vector<SiteGradient>& grads, bool base_grads) const {
  check_input(in);
  const Weights wt = effective(sites_);
  Workspace ws;
  forward_front(ws, wt, cfg_, in);
  ws.p = attention_probabilities(ws.q, ws.k);
  ws.attended = matmul(ws.p, ws.v);
  forward_back(ws, wt, cfg_);
  const Latent prediction = to_latent(ws);

  const Latent d_latent = upstream(prediction);
  if (!d_latent.same_shape(prediction)) throw DataError("upstream gradient has the wrong shape");
  grads.assign(kSiteCount, SiteGradient{});
  // Weight gradients of every dense site are cheap; keep them in a scratch
  // array and fold them into adapter gradients at the end.
  std::array<std::vector<double>, kSiteCount> dw;
  std::array<std::vector<double>, kSiteCount> db;
  const int f = cfg_.hidden;

  Matrix dout(ws.out.rows, ws.out.cols);
  dout.data = d_latent.data;

  // Head.
  linear_grad_params(ws.act, dout, dw[kHeadOut], &db[kHeadOut]);
  Matrix dact = linear_grad_input(dout, wt.w[kHeadOut], f);
  for (std::size_t i = 0; i < dact.data.size(); ++i) dact.data[i] *= silu_grad(ws.pre.data[i]);
  dw[kHeadHidden].assign(wt.w[kHeadHidden].size(), 0.0);
  db[kHeadHidden].assign(f, 0.0);
  kernels::conv3x3_grad_weight(ws.z.data, dact.data, dw[kHeadHidden], db[kHeadHidden], ws.conv(f, f));
  Matrix dh4(dact.rows, f);
  kernels::conv3x3_grad_input(dact.data, wt.w[kHeadHidden], dh4.data, ws.conv(f, f));
  for (std::size_t i = 0; i < dh4.data.size(); ++i) dh4.data[i] *= silu_grad(ws.h4.data[i]);

  // Second residual block.
  Matrix dh3 = residual_block_backward(ws, wt, kTemb2, kConv2, dh4, ws.u2, ws.a2, grads, base_grads);

  // Token update h3 = h2 + up(s + cx).
  Matrix du(ws.tokens, f);
  for (int p = 0; p < dh3.rows; ++p)
    for (int c = 0; c < f; ++c) du(ws.cell[p], c) += dh3(p, c);

  // Cross-attention.
  linear_grad_params(ws.attended_c, du, dw[kCrossO], nullptr);
  const Matrix dattended_c = linear_grad_input(du, wt.w[kCrossO], f);
  const AttentionGrads gc = attention_backward(dattended_c, ws.pc, ws.qc, ws.kc, ws.vc);
  linear_grad_params(ws.t2, gc.dq, dw[kCrossQ], nullptr);
  linear_grad_params(*ws.prompt, gc.dk, dw[kCrossK], nullptr);
  linear_grad_params(*ws.prompt, gc.dv, dw[kCrossV], nullptr);
  const Matrix dt2 = linear_grad_input(gc.dq, wt.w[kCrossQ], f);

  // Self-attention; s feeds both t2 and the token update.
  Matrix ds = du;
  add_in_place(ds, dt2);
  linear_grad_params(ws.attended, ds, dw[kAttnO], nullptr);
  const Matrix dattended = linear_grad_input(ds, wt.w[kAttnO], f);
  const AttentionGrads ga = attention_backward(dattended, ws.p, ws.q, ws.k, ws.v);
  linear_grad_params(ws.t, ga.dq, dw[kAttnQ], nullptr);
  linear_grad_params(ws.t, ga.dk, dw[kAttnK], nullptr);
  linear_grad_params(ws.t, ga.dv, dw[kAttnV], nullptr);
  Matrix dt = dt2;
  add_in_place(dt, linear_grad_input(ga.dq, wt.w[kAttnQ], f));
  add_in_place(dt, linear_grad_input(ga.dk, wt.w[kAttnK], f));
  add_in_place(dt, linear_grad_input(ga.dv, wt.w[kAttnV], f));

  // Mean pooling t = pool(h2).
  Matrix dh2 = dh3;
  for (int p = 0; p < dh2.rows; ++p) {
    const int tok = ws.cell[p];
    for (int c = 0; c < f; ++c) dh2(p, c) += dt(tok, c) / ws.cell_size[tok];
  }

  // First residual block and stem: only base weights live down here.
  if (base_grads) {
    const Matrix dh1 = residual_block_backward(ws, wt, kTemb1, kConv1, dh2, ws.u1, ws.a1, grads, base_grads);
    auto& g = grads[kStem];
    g.weight.assign(wt.w[kStem].size(), 0.0);
    g.bias.assign(f, 0.0);
    kernels::conv3x3_grad_weight(ws.h0.data, dh1.data, g.weight, g.bias, ws.conv(2 * ws.channels, f));
  }

  for (int i = 0; i < kSiteCount; ++i) {
    const WeightSite& site = sites_[i];
    if (dw[i].empty()) continue;
    if (base_grads) {
      grads[i].weight = dw[i];
      grads[i].bias = db[i];
    }
    if (!site.lora) continue;
    const LoraAdapter& l = *site.lora;
    const double s = l.scale();
    // dB = s * dW * A^T, dA = s * B^T * dW.
    auto& g = grads[i];
    g.lora_b.assign(static_cast<std::size_t>(l.out) * l.rank, 0.0);
    g.lora_a.assign(static_cast<std::size_t>(l.rank) * l.in, 0.0);
    for (int o = 0; o < l.out; ++o)
      for (int r = 0; r < l.rank; ++r) {
        double acc = 0.0;
        for (int j = 0; j < l.in; ++j)
          acc += dw[i][static_cast<std::size_t>(o) * l.in + j] * l.a[static_cast<std::size_t>(r) * l.in + j];
        g.lora_b[static_cast<std::size_t>(o) * l.rank + r] = s * acc;
      }
    for (int r = 0; r < l.rank; ++r)
      for (int j = 0; j < l.in; ++j) {
        double acc = 0.0;
        for (int o = 0; o < l.out; ++o)
          acc += l.b[static_cast<std::size_t>(o) * l.rank + r] * dw[i][static_cast<std::size_t>(o) * l.in + j];
        g.lora_a[static_cast<std::size_t>(r) * l.in + j] = s * acc;
      }
  }
  return prediction;
}

}  // namespace hazegen::model
