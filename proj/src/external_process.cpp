// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hazegen/external_process.hpp"

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstdint>
#include <cstring>
#include <vector>

#include "hazegen/error.hpp"
#include "hazegen/image_io.hpp"

namespace hazegen {
namespace {

bool write_all(int fd, const void* data, std::size_t n) {
  const auto* p = static_cast<const char*>(data);
  while (n > 0) {
    const ssize_t k = ::write(fd, p, n);
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) return false;
    p += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

bool read_all(int fd, void* data, std::size_t n) {
  auto* p = static_cast<char*>(data);
  while (n > 0) {
    const ssize_t k = ::read(fd, p, n);
    if (k < 0 && errno == EINTR) continue;
    if (k <= 0) return false;
    p += k;
    n -= static_cast<std::size_t>(k);
  }
  return true;
}

bool write_frame(int fd, const Image& img) {
  const auto bytes = io::encode_raw(img);
  const auto len = static_cast<std::uint32_t>(bytes.size());
  return write_all(fd, &len, 4) && write_all(fd, bytes.data(), bytes.size());
}

bool read_frame(int fd, Image& img) {
  std::uint32_t len = 0;
  if (!read_all(fd, &len, 4)) return false;
  std::vector<std::uint8_t> bytes(len);
  if (!read_all(fd, bytes.data(), len)) return false;
  img = io::decode_raw(bytes.data(), bytes.size());
  return true;
}

}  // namespace

FramedProcess::FramedProcess(const std::filesystem::path& executable) : name_(executable.string()) {
  if (::access(executable.c_str(), X_OK) != 0)
    throw ConfigError("external adapter is not executable: " + name_);
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0)
    throw DataError("cannot create pipes for " + name_);
  pid_ = ::fork();
  if (pid_ < 0) throw DataError("cannot fork for " + name_);
  if (pid_ == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl(executable.c_str(), executable.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  ::signal(SIGPIPE, SIG_IGN);
}

FramedProcess::~FramedProcess() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    ::waitpid(pid_, &status, 0);
  }
}

Image FramedProcess::call(const Image& input) {
  Image out;
  if (!write_frame(to_child_, input) || !read_frame(from_child_, out))
    throw DataError("external adapter " + name_ + " closed its pipe");
  return out;
}

int serve_frames_impl(Image (*fn)(const Image&, void*), void* ctx) {
  Image in;
  while (read_frame(STDIN_FILENO, in)) {
    if (!write_frame(STDOUT_FILENO, fn(in, ctx))) return 1;
  }
  return 0;
}

}  // namespace hazegen
