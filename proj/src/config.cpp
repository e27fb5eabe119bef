// Copyright 2026 The Hazegen Authors
// SPDX-License-Identifier: Apache-2.0

#include "hazegen/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "hazegen/error.hpp"

namespace hazegen {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& text, const std::string& key, std::size_t line) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("'" + key + "' expects a number", line);
  return v;
}

std::int64_t to_int(const std::string& text, const std::string& key, std::size_t line) {
  std::int64_t v = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) throw ParseError("'" + key + "' expects an integer", line);
  return v;
}

std::pair<std::string, std::string> split_pair(const std::string& text, const std::string& key,
                                               std::size_t line) {
  const auto comma = text.find(',');
  if (comma == std::string::npos) throw ParseError("'" + key + "' expects 'lo, hi'", line);
  return {trim(text.substr(0, comma)), trim(text.substr(comma + 1))};
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    if (body.front() == '[') {
      if (body.back() != ']') throw ParseError("unterminated section header", line);
      section = trim(body.substr(1, body.size() - 2));
      continue;
    }
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw ParseError("expected 'key = value'", line);
    std::string key = trim(body.substr(0, eq));
    std::string value = trim(body.substr(eq + 1));
    if (key.empty()) throw ParseError("empty key", line);
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    if (!section.empty()) key = section + "." + key;
    if (kv.values_.count(key)) throw ParseError("duplicate key '" + key + "'", line);
    kv.values_[key] = {value, line};
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config: " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const KeyValues::Entry* KeyValues::find(const std::string& key) {
  consumed_.insert(key);
  const auto it = values_.find(key);
  return it == values_.end() ? nullptr : &it->second;
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) {
  const Entry* e = find(key);
  return e ? e->text : fallback;
}

double KeyValues::get_double(const std::string& key, double fallback) {
  const Entry* e = find(key);
  return e ? to_double(e->text, key, e->line) : fallback;
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) {
  const Entry* e = find(key);
  return e ? to_int(e->text, key, e->line) : fallback;
}

Range<double> KeyValues::get_range(const std::string& key, Range<double> fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  auto [lo, hi] = split_pair(e->text, key, e->line);
  return {to_double(lo, key, e->line), to_double(hi, key, e->line)};
}

Range<int> KeyValues::get_int_range(const std::string& key, Range<int> fallback) {
  const Entry* e = find(key);
  if (!e) return fallback;
  auto [lo, hi] = split_pair(e->text, key, e->line);
  return {static_cast<int>(to_int(lo, key, e->line)), static_cast<int>(to_int(hi, key, e->line))};
}

void KeyValues::reject_unknown() const {
  for (const auto& [key, entry] : values_) {
    if (!consumed_.count(key))
      throw ConfigError("line " + std::to_string(entry.line) + ": unknown config key '" + key + "'");
  }
}

std::string format_range(Range<double> r) {
  std::ostringstream os;
  os.precision(17);
  os << r.lo << ", " << r.hi;
  return os.str();
}

std::string format_range(Range<int> r) {
  return std::to_string(r.lo) + ", " + std::to_string(r.hi);
}

std::uint64_t fnv1a64(const void* data, std::size_t length, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < length; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace hazegen
