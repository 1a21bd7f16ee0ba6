// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

namespace coral {

using KvMap = std::map<std::string, std::string>;

// key=value lines, sorted by key, one per line. Used for checkpoint/adapter
// metadata blocks and for config files.
std::string format_kv(const KvMap& kv);
KvMap parse_kv(std::string_view text);  // throws Error(format)

// Lookup helpers with typed parsing; missing keys throw Error(format) unless
// a default is supplied.
std::string kv_get(const KvMap& kv, const std::string& key);
std::string kv_get_or(const KvMap& kv, const std::string& key, std::string def);
std::uint64_t kv_get_u64(const KvMap& kv, const std::string& key);
std::uint64_t kv_get_u64_or(const KvMap& kv, const std::string& key, std::uint64_t def);
double kv_get_f64(const KvMap& kv, const std::string& key);
double kv_get_f64_or(const KvMap& kv, const std::string& key, double def);

}  // namespace coral
