// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#include "coral/kv.hpp"

#include <charconv>

#include <fmt/format.h>

#include "coral/error.hpp"

namespace coral {

std::string format_kv(const KvMap& kv) {
  std::string out;
  for (const auto& [k, v] : kv) {
    out += k;
    out += '=';
    out += v;
    out += '\n';
  }
  return out;
}

KvMap parse_kv(std::string_view text) {
  KvMap kv;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t eol = text.find('\n', pos);
    if (eol == std::string_view::npos) eol = text.size();
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::format, fmt::format("kv: line without '=': '{}'", line));
    }
    kv[std::string(line.substr(0, eq))] = std::string(line.substr(eq + 1));
  }
  return kv;
}

std::string kv_get(const KvMap& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end()) {
    throw Error(ErrorKind::format, fmt::format("kv: missing key '{}'", key));
  }
  return it->second;
}

std::string kv_get_or(const KvMap& kv, const std::string& key, std::string def) {
  auto it = kv.find(key);
  return it == kv.end() ? std::move(def) : it->second;
}

std::uint64_t kv_get_u64(const KvMap& kv, const std::string& key) {
  const std::string s = kv_get(kv, key);
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw Error(ErrorKind::format, fmt::format("kv: key '{}' is not an integer: '{}'", key, s));
  }
  return v;
}

std::uint64_t kv_get_u64_or(const KvMap& kv, const std::string& key, std::uint64_t def) {
  return kv.count(key) ? kv_get_u64(kv, key) : def;
}

double kv_get_f64(const KvMap& kv, const std::string& key) {
  const std::string s = kv_get(kv, key);
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::format, fmt::format("kv: key '{}' is not a number: '{}'", key, s));
  }
}

double kv_get_f64_or(const KvMap& kv, const std::string& key, double def) {
  return kv.count(key) ? kv_get_f64(kv, key) : def;
}

}  // namespace coral
