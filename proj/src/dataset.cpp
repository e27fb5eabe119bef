// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hazegen/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "hazegen/error.hpp"
#include "hazegen/external_process.hpp"
#include "hazegen/image_io.hpp"

namespace hazegen::data {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TagInfo {
  PromptTag tag;
  std::string_view name;
  std::string_view text;
};

constexpr TagInfo kTags[] = {
    {PromptTag::kId, "ID", "A dehazed image with slight degradation."},
    {PromptTag::kDe, "DE", "A high-resolution, dehazed image with slight degradation."},
    {PromptTag::kBs, "BS", "An image with no degradation, generation."},
    {PromptTag::kLow, "LOW", "A dehazed image with slight degradation"},
    {PromptTag::kHigh, "HIGH", "A high-resolution, dehazed image with no degradation, generation"},
};

class ExternalEnhancer final : public Enhancer {
 public:
  explicit ExternalEnhancer(const fs::path& exe) : process_(exe) {}
  Image enhance(const Image& img) override { return process_.call(img); }

 private:
  FramedProcess process_;
};

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

std::string_view prompt_text(PromptTag tag) {
  for (const auto& t : kTags)
    if (t.tag == tag) return t.text;
  throw ConfigError("unknown prompt tag");
}

std::string_view tag_name(PromptTag tag) {
  for (const auto& t : kTags)
    if (t.tag == tag) return t.name;
  throw ConfigError("unknown prompt tag");
}

PromptTag parse_tag(std::string_view name) {
  for (const auto& t : kTags)
    if (t.name == name) return t.tag;
  throw ParseError("unknown prompt tag '" + std::string(name) + "'", 0);
}

Image gaussian_blur(const Image& img, int radius) {
  if (radius < 1) return img;
  const double sigma = radius / 2.0;
  std::vector<double> k(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) total += k[i + radius] = std::exp(-i * i / (2 * sigma * sigma));
  for (double& v : k) v /= total;

  const int h = img.height(), w = img.width(), c_n = img.channels();
  std::vector<double> tmp(img.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < c_n; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[i + radius] * img.at(y, std::clamp(x + i, 0, w - 1), c);
        tmp[(static_cast<std::size_t>(y) * w + x) * c_n + c] = acc;
      }
  Image out(h, w, c_n);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < c_n; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i)
          acc += k[i + radius] * tmp[(static_cast<std::size_t>(std::clamp(y + i, 0, h - 1)) * w + x) * c_n + c];
        out.at(y, x, c) = static_cast<float>(acc);
      }
  return out;
}

Image UnsharpEnhancer::enhance(const Image& img) {
  const Image blurred = gaussian_blur(img, radius_);
  Image out(img.height(), img.width(), img.channels());
  for (std::size_t i = 0; i < img.size(); ++i) {
    const double y = img.data()[i];
    out.data()[i] = static_cast<float>(std::clamp(y + amount_ * (y - blurred.data()[i]), 0.0, 1.0));
  }
  return out;
}

std::unique_ptr<Enhancer> make_enhancer(const std::string& spec) {
  if (spec == "toy:identity") return std::make_unique<IdentityEnhancer>();
  if (spec == "toy:unsharp") return std::make_unique<UnsharpEnhancer>();
  if (spec.rfind("external:", 0) == 0) return std::make_unique<ExternalEnhancer>(spec.substr(9));
  throw ConfigError("unresolvable enhancer spec: " + spec);
}

Dataset build_id_pairs(std::span<const Image> haze_images, tiling::Restorer& restorer,
                       const TileSettings& tiles) {
  if (haze_images.empty()) throw DataError("build_id_pairs: no haze images");
  Dataset out;
  out.reserve(haze_images.size());
  for (std::size_t i = 0; i < haze_images.size(); ++i) {
    const Image& x = haze_images[i];
    const auto plan = tiling::tile_plan(x.height(), x.width(), tiles.window, tiles.stride);
    auto result = tiling::run_tiled(restorer, x, plan);
    TrainingSample s;
    s.input = x;
    s.target = std::move(result.mean);
    s.mask = tiling::confidence_from_variance(result.variance, tiles.tau);
    s.prompt = PromptTag::kId;
    s.source_index = static_cast<int>(i);
    out.push_back(std::move(s));
  }
  return out;
}

Dataset build_de_pairs(const Dataset& id_pairs, Enhancer& enhancer) {
  Dataset out;
  out.reserve(id_pairs.size());
  for (const auto& s : id_pairs) {
    TrainingSample d = s;
    d.target = enhancer.enhance(s.target);
    if (!d.target.same_shape(s.target)) throw DataError("enhancer changed the image size");
    d.prompt = PromptTag::kDe;
    out.push_back(std::move(d));
  }
  return out;
}

Dataset build_bs_pairs(std::span<const Image> clear_images, std::span<const Image> light_pool,
                       const augment::AugmentConfig& cfg, Rng& rng) {
  if (clear_images.empty()) throw DataError("build_bs_pairs: no clear images");
  if (light_pool.empty()) throw DataError("build_bs_pairs: light map pool is empty");
  Dataset out;
  out.reserve(clear_images.size());
  for (std::size_t i = 0; i < clear_images.size(); ++i) {
    const Image& y = clear_images[i];
    auto aug = augment::augment(y, light_pool, cfg, rng);
    TrainingSample s;
    s.input = std::move(aug.image);
    s.target = y;
    s.mask.values = Image(y.height(), y.width(), 1, 1.0f);
    s.prompt = PromptTag::kBs;
    s.source_index = static_cast<int>(i);
    s.severity = aug.severity;
    out.push_back(std::move(s));
  }
  return out;
}

BatchStream::BatchStream(const Dataset& id_pairs, const Dataset& de_pairs, const Dataset& bs_pairs,
                         int batch_size, std::uint64_t seed)
    : id_(id_pairs), bs_(bs_pairs), third_(batch_size / 3), rng_(seed) {
  if (batch_size <= 0 || batch_size % 3 != 0)
    throw ConfigError("batch size must be a positive multiple of 3, got " + std::to_string(batch_size));
  if (id_pairs.empty()) throw DataError("initial-dehazing subset is empty");
  if (de_pairs.empty()) throw DataError("detail-enhancement subset is empty");
  if (bs_pairs.empty()) throw DataError("severe-degradation subset is empty");

  std::map<int, const TrainingSample*> de_map;
  for (const auto& s : de_pairs) de_map[s.source_index] = &s;
  for (const auto& s : id_pairs) {
    const auto it = de_map.find(s.source_index);
    if (it == de_map.end())
      throw DataError("no detail-enhancement pair for source " + std::to_string(s.source_index));
    de_by_source_.push_back(it->second);
  }
  id_order_.resize(id_pairs.size());
  bs_order_.resize(bs_pairs.size());
  std::iota(id_order_.begin(), id_order_.end(), 0);
  std::iota(bs_order_.begin(), bs_order_.end(), 0);
  shuffle(id_order_, rng_);
  shuffle(bs_order_, rng_);
}

std::size_t BatchStream::draw(std::vector<std::size_t>& order, std::size_t& cursor, std::size_t n,
                              bool count_epoch) {
  if (cursor == n) {
    shuffle(order, rng_);
    cursor = 0;
    if (count_epoch) ++epoch_;
  }
  return order[cursor++];
}

Batch BatchStream::next() {
  Batch b;
  b.samples.resize(3 * static_cast<std::size_t>(third_));
  for (int i = 0; i < third_; ++i) {
    const std::size_t k = draw(id_order_, id_cursor_, id_order_.size(), true);
    b.samples[i] = &id_[k];
    b.samples[third_ + i] = de_by_source_[k];
  }
  for (int i = 0; i < third_; ++i)
    b.samples[2 * third_ + i] = &bs_[draw(bs_order_, bs_cursor_, bs_order_.size(), false)];
  return b;
}

void write_manifest(const Dataset& dataset, const fs::path& path) {
  const fs::path dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  const std::string data_dir = path.stem().string() + "_data";
  fs::create_directories(dir / data_dir);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest: " + path.string());

  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& s = dataset[i];
    std::ostringstream stem;
    stem << data_dir << "/" << std::setw(5) << std::setfill('0') << i;
    const std::string input = stem.str() + "_input.f32";
    const std::string target = stem.str() + "_target.f32";
    io::write_raw(dir / input, s.input);
    io::write_raw(dir / target, s.target);

    json rec;
    rec["input"] = input;
    rec["target"] = target;
    if (s.prompt == PromptTag::kBs) {
      rec["mask"] = nullptr;
    } else {
      const std::string mask = stem.str() + "_mask.f32";
      io::write_raw(dir / mask, s.mask.values);
      rec["mask"] = mask;
    }
    rec["prompt_tag"] = std::string(tag_name(s.prompt));
    rec["source_index"] = s.source_index;
    if (s.severity)
      rec["severity"] = *s.severity;
    else
      rec["severity"] = nullptr;
    out << rec.dump() << "\n";
  }
}

Dataset read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest: " + path.string());
  const fs::path dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();

  Dataset out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    TrainingSample s;
    std::string input, target;
    json mask;
    try {
      const json rec = json::parse(line);
      input = rec.at("input").get<std::string>();
      target = rec.at("target").get<std::string>();
      mask = rec.at("mask");
      if (!mask.is_null() && !mask.is_string()) throw ParseError("mask must be a path or null", 0);
      s.prompt = parse_tag(rec.at("prompt_tag").get<std::string>());
      s.source_index = rec.at("source_index").get<int>();
      const json& sev = rec.at("severity");
      if (!sev.is_null()) s.severity = sev.get<double>();
    } catch (const ParseError& e) {
      throw ParseError(e.what(), lineno);
    } catch (const json::exception& e) {
      throw ParseError(std::string("malformed manifest record: ") + e.what(), lineno);
    }
    s.input = io::load_image(dir / input);
    s.target = io::load_image(dir / target);
    if (mask.is_null()) {
      s.mask.values = Image(s.input.height(), s.input.width(), 1, 1.0f);
    } else {
      s.mask.values = io::load_image(dir / mask.get<std::string>());
    }
    if (!s.input.same_extent(s.target) || !s.input.same_extent(s.mask.values))
      throw ParseError("input, target and mask sizes differ", lineno);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace hazegen::data
