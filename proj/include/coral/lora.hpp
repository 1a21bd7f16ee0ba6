// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "coral/backbone.hpp"

namespace coral {

// Which layers an expert adapts. Default is query/value projections in both
// the encoder and the action head (dual-target injection).
struct InjectionPolicy {
  std::set<LayerKind> kinds = {LayerKind::attn_q, LayerKind::attn_v};
  bool encoder = true;
  bool action_head = true;

  // Resolved target layer names in schema order; throws Error(config) when
  // the policy selects nothing.
  std::vector<std::string> targets(const BackboneConfig& config) const;

  std::string describe() const;                       // e.g. "attn_q+attn_v@enc+act"
  static InjectionPolicy parse(std::string_view text);  // inverse of describe
};

// One task's adapter: per-target-layer (A, B) low-rank pair. The merged
// update for a target weight W (d x m) is W + (alpha/rank) * B * A with
// B (d x rank) and A (rank x m).
struct LoraExpert {
  struct Delta {
    Matrix a;  // rank x m
    Matrix b;  // d x rank
  };

  std::string expert_id;
  std::uint32_t rank = 16;
  float alpha = 32.0f;
  std::vector<std::pair<std::string, Delta>> deltas;  // schema order
  std::uint64_t base_fingerprint = 0;
  std::map<std::string, std::string> meta;

  float scale() const noexcept { return alpha / static_cast<float>(rank); }
  const Delta& delta_for(std::string_view layer) const;  // Error(not_found)
  bool has_layer(std::string_view layer) const noexcept;
};

// A-Gaussian (std 0.02) / B-zero initialization, so a fresh expert is an
// exact no-op after merging.
LoraExpert init_expert(const BackboneConfig& config, const InjectionPolicy& policy,
                       std::uint32_t rank, float alpha, std::uint64_t seed);

// (alpha/rank) * B * A for one layer.
Matrix delta(const LoraExpert& expert, std::string_view layer);

// New weight table with every targeted layer replaced by W + delta; the
// input table must be frozen and must match the expert's base fingerprint.
BackboneWeights merge(const BackboneWeights& weights, const LoraExpert& expert);

// Sum over layers of rank * (d + m).
std::size_t expert_param_count(const LoraExpert& expert);

// param_count(config) / expert_param_count(expert).
double compression_ratio(const BackboneConfig& config, const LoraExpert& expert);

}  // namespace coral
