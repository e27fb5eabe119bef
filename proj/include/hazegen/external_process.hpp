// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <string>
#include <sys/types.h>

#include "hazegen/image.hpp"
#include "hazegen/tiling.hpp"

namespace hazegen {

/// Child process speaking length-prefixed frames over stdin/stdout. Each
/// frame is a little-endian u32 byte count followed by one raw float image
/// (u32 height, u32 width, float32 payload).
class FramedProcess {
 public:
  explicit FramedProcess(const std::filesystem::path& executable);
  ~FramedProcess();
  FramedProcess(const FramedProcess&) = delete;
  FramedProcess& operator=(const FramedProcess&) = delete;

  Image call(const Image& input);

 private:
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string name_;
};

/// Pretrained dehazer running out of process.
class ExternalRestorer final : public tiling::Restorer {
 public:
  ExternalRestorer(const std::filesystem::path& executable, int window)
      : process_(executable), window_(window) {}
  int window() const override { return window_; }
  Image restore(const Image& crop) override { return process_.call(crop); }
  bool thread_safe() const override { return false; }

 private:
  FramedProcess process_;
  int window_;
};

/// Serve frames on stdin/stdout until EOF; the counterpart used by adapter
/// executables.
template <typename Fn>
int serve_frames(Fn&& fn);

int serve_frames_impl(Image (*fn)(const Image&, void*), void* ctx);

template <typename Fn>
int serve_frames(Fn&& fn) {
  return serve_frames_impl(
      [](const Image& in, void* ctx) -> Image { return (*static_cast<Fn*>(ctx))(in); },
      static_cast<void*>(&fn));
}

}  // namespace hazegen
