// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "hazegen/image.hpp"

namespace hazegen::io {

/// 8-bit PNG. Values are scaled by 255 and rounded half up on write.
/// Reading always yields three channels; grayscale files are replicated.
Image read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const Image& img);

/// Raw little-endian float32 grid: u32 height, u32 width, then H*W*C floats.
/// The channel count is recovered from the payload length (1 or 3).
Image read_raw(const std::filesystem::path& path);
void write_raw(const std::filesystem::path& path, const Image& img);

/// Stream variants of the raw format, used for child-process frames.
Image read_raw(std::istream& in, const std::string& what);
void write_raw(std::ostream& out, const Image& img);
std::vector<std::uint8_t> encode_raw(const Image& img);
Image decode_raw(const std::uint8_t* bytes, std::size_t length);

/// Dispatch on extension: ".png" or ".f32".
Image load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const Image& img);

/// Sorted list of *.png and *.f32 files in a directory.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

}  // namespace hazegen::io
