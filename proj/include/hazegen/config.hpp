// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <utility>

namespace hazegen {

/// Closed numeric interval used throughout the configuration.
template <typename T>
struct Range {
  T lo;
  T hi;
  bool operator==(const Range&) const = default;
};

/// Flat `key = value` document. `#` starts a comment; `[section]` headers
/// prefix the following keys with `section.`.
///
/// Every getter marks its key as consumed so callers can reject leftovers
/// with `reject_unknown()` once all sections have been read.
class KeyValues {
 public:
  static KeyValues parse(const std::string& text);
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, std::string value) { values_[key] = {std::move(value), 0}; }

  std::string get_string(const std::string& key, const std::string& fallback);
  double get_double(const std::string& key, double fallback);
  std::int64_t get_int(const std::string& key, std::int64_t fallback);
  Range<double> get_range(const std::string& key, Range<double> fallback);
  Range<int> get_int_range(const std::string& key, Range<int> fallback);

  /// Throws ConfigError naming the first key no getter asked for.
  void reject_unknown() const;

 private:
  struct Entry {
    std::string text;
    std::size_t line;
  };
  const Entry* find(const std::string& key);

  std::map<std::string, Entry> values_;
  std::set<std::string> consumed_;
};

std::string format_range(Range<double> r);
std::string format_range(Range<int> r);

/// 64-bit FNV-1a. Used for prompt-token seeding and base-model fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t length,
                      std::uint64_t seed = 0xcbf29ce484222325ULL);
inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t seed = 0xcbf29ce484222325ULL) {
  return fnv1a64(s.data(), s.size(), seed);
}

}  // namespace hazegen
