// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "hazegen/error.hpp"
#include "hazegen/image.hpp"
#include "hazegen/image_io.hpp"
#include "hazegen/rng.hpp"

using namespace hazegen;
namespace fs = std::filesystem;

namespace {

Image random_image(int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  Image img(h, w, c);
  for (float& v : img.data()) v = static_cast<float>(rng.uniform());
  return img;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "hazegen_test_image";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("bilinear resize keeps constants and identity sizes") {
  const Image c(5, 7, 3, 0.25f);
  const Image r = resize_bilinear(c, 11, 3);
  CHECK(r.height() == 11);
  CHECK(r.width() == 3);
  for (float v : r.data()) CHECK(v == doctest::Approx(0.25f));
  const Image img = random_image(6, 4, 1, 1);
  CHECK(resize_bilinear(img, 6, 4) == img);
}

TEST_CASE("bilinear resize matches hand interpolation") {
  Image src(1, 2, 1);
  src.at(0, 0) = 0.0f;
  src.at(0, 1) = 1.0f;
  // Half-pixel centres: output x=0..3 samples source x = -0.25, 0.25, 0.75, 1.25.
  const Image r = resize_bilinear(src, 1, 4);
  CHECK(r.at(0, 0) == doctest::Approx(0.0));
  CHECK(r.at(0, 1) == doctest::Approx(0.25));
  CHECK(r.at(0, 2) == doctest::Approx(0.75));
  CHECK(r.at(0, 3) == doctest::Approx(1.0));
}

TEST_CASE("raw float files round-trip bit-exactly") {
  for (int c : {1, 3}) {
    const Image img = random_image(9, 13, c, 3 + c);
    const fs::path p = scratch("rt" + std::to_string(c) + ".f32");
    io::write_raw(p, img);
    CHECK(io::read_raw(p) == img);
    const auto bytes = io::encode_raw(img);
    CHECK(io::decode_raw(bytes.data(), bytes.size()) == img);
  }
}

TEST_CASE("raw decoding rejects bad payloads") {
  const Image img = random_image(2, 2, 3, 1);
  auto bytes = io::encode_raw(img);
  bytes.pop_back();
  CHECK_THROWS_AS(io::decode_raw(bytes.data(), bytes.size()), DataError);
  CHECK_THROWS_AS(io::read_raw(scratch("does_not_exist.f32")), DataError);
}

TEST_CASE("png round-trip quantizes to 8 bits") {
  const Image img = random_image(8, 5, 3, 7);
  const fs::path p = scratch("rt.png");
  io::write_png(p, img);
  const Image back = io::read_png(p);
  REQUIRE(back.same_shape(img));
  for (std::size_t i = 0; i < img.size(); ++i) CHECK(std::abs(back.data()[i] - img.data()[i]) <= 0.5f / 255 + 1e-6f);
}

TEST_CASE("grayscale png reads back as three equal channels") {
  Image g(3, 3, 1, 0.0f);
  g.at(1, 1) = 1.0f;
  const fs::path p = scratch("gray.png");
  io::write_png(p, g);
  const Image back = io::read_png(p);
  CHECK(back.channels() == 3);
  CHECK(back.at(1, 1, 0) == 1.0f);
  CHECK(back.at(1, 1, 2) == 1.0f);
  CHECK(back.at(0, 0, 1) == 0.0f);
}

TEST_CASE("list_images is sorted and filters extensions") {
  const fs::path dir = scratch("listing");
  fs::remove_all(dir);
  fs::create_directories(dir);
  io::write_raw(dir / "b.f32", Image(2, 2, 3));
  io::write_png(dir / "a.png", Image(2, 2, 3));
  std::ofstream(dir / "notes.txt") << "x";
  const auto files = io::list_images(dir);
  REQUIRE(files.size() == 2);
  CHECK(files[0].filename() == "a.png");
  CHECK(files[1].filename() == "b.f32");
}

TEST_CASE("image statistics") {
  Image img(1, 2, 3);
  const float vals[] = {0, 1, 2, 3, 4, 5};
  std::copy(vals, vals + 6, img.data().begin());
  CHECK(min_value(img) == 0.0f);
  CHECK(max_value(img) == 5.0f);
  CHECK(mean_value(img) == doctest::Approx(2.5));
  const Image m = channel_mean(img);
  CHECK(m.at(0, 0) == doctest::Approx(1.0));
  CHECK(m.at(0, 1) == doctest::Approx(4.0));
  CHECK_FALSE(all_within(img, 0.0f, 4.0f));
  clamp_unit(img);
  CHECK(all_within(img, 0.0f, 1.0f));
}
