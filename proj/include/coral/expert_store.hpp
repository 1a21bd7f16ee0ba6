// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "coral/backbone.hpp"
#include "coral/kv.hpp"
#include "coral/lora.hpp"

namespace coral {

// One binary container for everything on disk (see docs/FORMATS.md):
//   magic "CRLX" | version u16 | kind u8 | flags u8 | metadata | entries | fnv64
// Adapters store low-rank (A, B) pairs per entry; base checkpoints and task
// datasets store full matrices (rank field 0). All integers little-endian,
// payloads f32 little-endian, trailer FNV-1a-64 of all preceding bytes.
inline constexpr char kContainerMagic[4] = {'C', 'R', 'L', 'X'};
inline constexpr std::uint16_t kContainerVersion = 1;

inline constexpr std::uint8_t kKindBase = 0;
inline constexpr std::uint8_t kKindAdapter = 1;
inline constexpr std::uint8_t kKindTaskData = 2;

struct ContainerEntry {
  std::string name;
  std::uint32_t rank = 0;  // 0 => full matrix payload; else A (rank x m), B (d x rank)
  Matrix full;             // rank == 0
  Matrix a, b;             // rank > 0
};

struct Container {
  std::uint8_t kind = kKindAdapter;
  KvMap meta;
  std::vector<ContainerEntry> entries;
};

std::vector<std::uint8_t> serialize_container(const Container& c);
Container parse_container(std::span<const std::uint8_t> bytes);

// Atomic write (temp file + rename) / whole-file read.
void write_container(const Container& c, const std::filesystem::path& path);
Container read_container(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Adapters

void save_expert(const LoraExpert& expert, const std::filesystem::path& path);
LoraExpert load_expert(const std::filesystem::path& path);

// Serialized byte length of the expert file.
std::size_t expert_size_bytes(const LoraExpert& expert);

// Closed-form length: fixed header + metadata block + per-entry headers +
// 4 bytes per parameter + trailer. Must equal expert_size_bytes exactly.
std::size_t expected_adapter_file_size(const LoraExpert& expert);

// ---------------------------------------------------------------------------
// Base checkpoints

void save_backbone(const BackboneWeights& weights, const std::filesystem::path& path);
BackboneWeights load_backbone(const std::filesystem::path& path);

// FNV-1a-64 over the canonical serialization (config kv + ordered layer
// names, shapes and payload bytes). Guards experts against base skew.
std::uint64_t fingerprint(const BackboneWeights& weights);

// ---------------------------------------------------------------------------
// Registry (the routing table)

enum class RouteMissBehavior { base_fallback, reject };

struct RegistryEntry {
  std::string instruction;  // normalized
  std::string expert_id;
  std::string path;         // resolved
};

// Manifest: one entry per line, "instruction<TAB>expert_id<TAB>path",
// '#' comments allowed. Instructions are normalized (lowercase, trimmed,
// whitespace collapsed) and must be unique after normalization.
class ExpertRegistry {
 public:
  ExpertRegistry() = default;

  // Loads and validates: every adapter must parse cleanly and carry the
  // expert_id the manifest claims. Paths resolve relative to the manifest.
  static ExpertRegistry load(const std::filesystem::path& manifest_path,
                             RouteMissBehavior behavior = RouteMissBehavior::base_fallback);

  // In-memory construction; performs normalization and uniqueness checks but
  // no file validation (callers may point entries at files that do not load,
  // e.g. for fault-injection tests).
  static ExpertRegistry from_entries(std::vector<RegistryEntry> entries,
                                     RouteMissBehavior behavior = RouteMissBehavior::base_fallback);

  const std::vector<RegistryEntry>& entries() const noexcept { return entries_; }
  RouteMissBehavior miss_behavior() const noexcept { return miss_; }

  const RegistryEntry* lookup(std::string_view normalized_instruction) const noexcept;
  const RegistryEntry* find_expert(std::string_view expert_id) const noexcept;

  // Sum of adapter file sizes (available after load()).
  std::uintmax_t total_adapter_bytes() const noexcept { return total_bytes_; }

 private:
  std::vector<RegistryEntry> entries_;
  std::map<std::string, std::size_t, std::less<>> by_instruction_;
  std::map<std::string, std::size_t, std::less<>> by_id_;
  RouteMissBehavior miss_ = RouteMissBehavior::base_fallback;
  std::uintmax_t total_bytes_ = 0;

  void index_entries();
};

}  // namespace coral
