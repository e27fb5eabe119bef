// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hazegen/augment.hpp"
#include "hazegen/image.hpp"
#include "hazegen/rng.hpp"
#include "hazegen/tiling.hpp"

namespace hazegen::data {

/// Which training subset (or inference branch) a prompt belongs to.
enum class PromptTag { kId, kDe, kBs, kLow, kHigh };

/// The fixed conditioning text for a tag.
std::string_view prompt_text(PromptTag tag);
/// Short manifest name: "ID", "DE", "BS", "LOW", "HIGH".
std::string_view tag_name(PromptTag tag);
/// Inverse of tag_name; throws ParseError on unknown strings.
PromptTag parse_tag(std::string_view name);

struct TrainingSample {
  Image input;
  Image target;
  tiling::ConfidenceMap mask;
  PromptTag prompt = PromptTag::kId;
  int source_index = 0;
  std::optional<double> severity;  // set for severe-degradation samples

  bool operator==(const TrainingSample&) const = default;
};

using Dataset = std::vector<TrainingSample>;

/// Size-preserving image-to-image model producing a sharper target.
class Enhancer {
 public:
  virtual ~Enhancer() = default;
  virtual Image enhance(const Image& img) = 0;
};

class IdentityEnhancer final : public Enhancer {
 public:
  Image enhance(const Image& img) override { return img; }
};

/// clamp(y + amount * (y - blur(y))) with a Gaussian blur of the given radius
/// (sigma = radius / 2, replicated borders).
class UnsharpEnhancer final : public Enhancer {
 public:
  explicit UnsharpEnhancer(double amount = 0.5, int radius = 2) : amount_(amount), radius_(radius) {}
  Image enhance(const Image& img) override;

 private:
  double amount_;
  int radius_;
};

/// Separable Gaussian blur used by UnsharpEnhancer.
Image gaussian_blur(const Image& img, int radius);

/// `toy:identity`, `toy:unsharp` or `external:<path>`.
std::unique_ptr<Enhancer> make_enhancer(const std::string& spec);

struct TileSettings {
  int window = 224;
  int stride = 112;
  double tau = tiling::kDefaultConfidenceTau;
};

/// Initial dehazing pairs: targets and confidence masks from tiled inference.
Dataset build_id_pairs(std::span<const Image> haze_images, tiling::Restorer& restorer,
                       const TileSettings& tiles);

/// Detail-enhancement pairs: same inputs and masks, enhanced targets.
Dataset build_de_pairs(const Dataset& id_pairs, Enhancer& enhancer);

/// Severe-degradation pairs from clear images; masks are all ones.
Dataset build_bs_pairs(std::span<const Image> clear_images, std::span<const Image> light_pool,
                       const augment::AugmentConfig& cfg, Rng& rng);

/// One balanced batch: the first third are ID samples, the second third the
/// DE samples for the same sources in the same order, the last third BS.
struct Batch {
  std::vector<const TrainingSample*> samples;
  std::size_t third() const { return samples.size() / 3; }
};

/// Endless seeded stream of balanced batches. ID sources are visited in a
/// shuffled order that is redrawn every epoch; BS samples cycle through an
/// independent permutation.
class BatchStream {
 public:
  BatchStream(const Dataset& id_pairs, const Dataset& de_pairs, const Dataset& bs_pairs,
              int batch_size, std::uint64_t seed);
  Batch next();
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t draw(std::vector<std::size_t>& order, std::size_t& cursor, std::size_t n,
                   bool count_epoch);

  const Dataset& id_;
  const Dataset& bs_;
  std::vector<const TrainingSample*> de_by_source_;
  std::vector<int> id_sources_;
  int third_;
  Rng rng_;
  std::vector<std::size_t> id_order_, bs_order_;
  std::size_t id_cursor_ = 0, bs_cursor_ = 0;
  std::size_t epoch_ = 0;
};

/// JSON-lines manifest. Image payloads are written as raw float files next to
/// the manifest (in `<stem>_data/`) and referenced by relative path.
void write_manifest(const Dataset& dataset, const std::filesystem::path& path);
Dataset read_manifest(const std::filesystem::path& path);

}  // namespace hazegen::data
