// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "coral/matrix.hpp"

namespace coral {

// Desk-scale "encoder + action head" policy. The encoder fuses instruction
// tokens with one projected observation token; the action head emits a fixed
// horizon of action vectors from learned query tokens that cross-attend to
// the encoder output.
struct BackboneConfig {
  std::size_t model_dim = 64;    // d; must be divisible by heads
  std::size_t enc_layers = 2;
  std::size_t act_layers = 2;
  std::size_t heads = 4;
  std::size_t vocab_size = 64;
  std::size_t max_instr_len = 8;
  std::size_t obs_dim = 32;
  std::size_t proprio_dim = 8;
  std::size_t chunk_horizon = 8;  // H
  std::size_t action_dim = 23;    // d_a (23-DoF dual-arm default)
  std::uint64_t seed = 0;

  // Instruction tokens plus one observation token.
  std::size_t seq_len() const noexcept { return max_instr_len + 1; }
  std::size_t mlp_hidden() const noexcept { return 4 * model_dim; }

  void validate() const;  // throws Error(config)

  // key=value serialization used in checkpoint metadata and config files.
  std::map<std::string, std::string> to_kv() const;
  static BackboneConfig from_kv(const std::map<std::string, std::string>& kv);
};

bool operator==(const BackboneConfig& a, const BackboneConfig& b) noexcept;

enum class LayerKind : std::uint8_t {
  attn_q,
  attn_k,
  attn_v,
  attn_o,
  mlp,
  embed,
  out_proj,
};

const char* to_string(LayerKind kind) noexcept;
LayerKind layer_kind_from_string(std::string_view name);  // throws Error(format)

struct LayerSpec {
  std::string name;
  LayerKind kind;
  std::size_t rows;
  std::size_t cols;
};

// Canonical layer table for a config: names, kinds and shapes in the fixed
// order used by initialization, serialization and fingerprinting.
std::vector<LayerSpec> layer_schema(const BackboneConfig& config);

// Closed-form total parameter count; matches the sum over layer_schema.
std::size_t param_count(const BackboneConfig& config);

struct LayerWeights {
  std::string name;
  LayerKind kind = LayerKind::embed;
  Matrix weight;
};

// The base policy parameters. Once frozen, every training-facing mutation
// path throws; expert merging never mutates an existing table, it builds a
// new one via with_added().
class BackboneWeights {
 public:
  BackboneWeights() = default;

  // Deterministic seeded initialization: every layer filled from one
  // SplitMix64 stream in schema order, Gaussian std 0.02.
  static BackboneWeights init(const BackboneConfig& config);

  // Reassemble from externally loaded parts (checkpoint loader).
  static BackboneWeights assemble(const BackboneConfig& config,
                                  std::vector<Matrix> weights_in_schema_order,
                                  bool frozen);

  const BackboneConfig& config() const noexcept { return cfg_; }
  const std::vector<LayerWeights>& layers() const noexcept { return layers_; }

  const LayerWeights& layer(std::string_view name) const;  // Error(not_found)
  const Matrix& weight(std::string_view name) const { return layer(name).weight; }
  bool has_layer(std::string_view name) const noexcept;

  bool frozen() const noexcept { return frozen_; }
  void freeze() noexcept { frozen_ = true; }

  // Training-path access; throws Error(contract) when frozen.
  Matrix& trainable_weight(std::string_view name);

  BackboneWeights unfrozen_clone() const;

  // Serving-path update used by expert merge: produces a new table where the
  // named layers are replaced, everything else copied byte-for-byte.
  BackboneWeights with_replaced(const std::vector<std::pair<std::string, Matrix>>& layers) const;

 private:
  BackboneConfig cfg_;
  std::vector<LayerWeights> layers_;
  std::map<std::string, std::size_t, std::less<>> index_;
  bool frozen_ = false;

  void rebuild_index();
};

bool byte_equal(const BackboneWeights& a, const BackboneWeights& b) noexcept;

// ---------------------------------------------------------------------------
// Inputs / outputs

struct Observation {
  std::vector<float> features;  // obs_dim, stand-in for an image
  std::vector<float> proprio;   // proprio_dim
};

struct Instruction {
  std::string raw_text;
  std::vector<std::uint32_t> tokens;  // length max_instr_len, zero-padded

  // Whitespace + vocab-lookup tokenizer. Normalizes (lowercase, collapse
  // whitespace) before lookup so routing and encoding agree on text.
  static Instruction from_text(const BackboneConfig& config, std::string_view text);
  static Instruction from_tokens(const BackboneConfig& config,
                                 std::vector<std::uint32_t> tokens,
                                 std::string raw_text = {});
};

struct ActionChunk {
  Matrix actions;  // H x d_a
};

bool operator==(const ActionChunk& a, const ActionChunk& b) noexcept;

// Instruction vocabulary: id 0 is the pad token, ids beyond the built-in
// word list fall back to "w<id>".
std::string vocab_word(std::size_t id);
std::optional<std::uint32_t> vocab_lookup(std::string_view word, std::size_t vocab_size);

// Lowercase, trim, collapse internal whitespace. Shared by the tokenizer and
// the expert registry.
std::string normalize_instruction(std::string_view text);

// ---------------------------------------------------------------------------
// Forward paths (pure; deterministic; the optional counter accumulates the
// multiply-accumulate cost, which is a function of the config only)

Matrix encode(const BackboneWeights& weights, const Instruction& instr, const Observation& obs);

ActionChunk act(const BackboneWeights& weights, const Matrix& z, const std::vector<float>& proprio);

ActionChunk forward(const BackboneWeights& weights, const Instruction& instr,
                    const Observation& obs, std::uint64_t* mac_count = nullptr);

}  // namespace coral
