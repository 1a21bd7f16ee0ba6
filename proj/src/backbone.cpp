// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#include "coral/backbone.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include <fmt/format.h>

#include "coral/detail/netops.hpp"
#include "coral/kv.hpp"
#include "coral/rng.hpp"

namespace coral {

void BackboneConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v < 1) throw Error(ErrorKind::config, fmt::format("config: {} must be >= 1", name));
  };
  positive(model_dim, "model_dim");
  positive(enc_layers, "enc_layers");
  positive(act_layers, "act_layers");
  positive(heads, "heads");
  positive(vocab_size, "vocab_size");
  positive(max_instr_len, "max_instr_len");
  positive(obs_dim, "obs_dim");
  positive(proprio_dim, "proprio_dim");
  positive(chunk_horizon, "chunk_horizon");
  positive(action_dim, "action_dim");
  if (model_dim % heads != 0) {
    throw Error(ErrorKind::config,
                fmt::format("config: model_dim {} not divisible by heads {}", model_dim, heads));
  }
}

std::map<std::string, std::string> BackboneConfig::to_kv() const {
  return {
      {"model_dim", std::to_string(model_dim)},
      {"enc_layers", std::to_string(enc_layers)},
      {"act_layers", std::to_string(act_layers)},
      {"heads", std::to_string(heads)},
      {"vocab_size", std::to_string(vocab_size)},
      {"max_instr_len", std::to_string(max_instr_len)},
      {"obs_dim", std::to_string(obs_dim)},
      {"proprio_dim", std::to_string(proprio_dim)},
      {"chunk_horizon", std::to_string(chunk_horizon)},
      {"action_dim", std::to_string(action_dim)},
      {"seed", std::to_string(seed)},
  };
}

BackboneConfig BackboneConfig::from_kv(const std::map<std::string, std::string>& kv) {
  BackboneConfig c;
  c.model_dim = kv_get_u64_or(kv, "model_dim", c.model_dim);
  c.enc_layers = kv_get_u64_or(kv, "enc_layers", c.enc_layers);
  c.act_layers = kv_get_u64_or(kv, "act_layers", c.act_layers);
  c.heads = kv_get_u64_or(kv, "heads", c.heads);
  c.vocab_size = kv_get_u64_or(kv, "vocab_size", c.vocab_size);
  c.max_instr_len = kv_get_u64_or(kv, "max_instr_len", c.max_instr_len);
  c.obs_dim = kv_get_u64_or(kv, "obs_dim", c.obs_dim);
  c.proprio_dim = kv_get_u64_or(kv, "proprio_dim", c.proprio_dim);
  c.chunk_horizon = kv_get_u64_or(kv, "chunk_horizon", c.chunk_horizon);
  c.action_dim = kv_get_u64_or(kv, "action_dim", c.action_dim);
  c.seed = kv_get_u64_or(kv, "seed", c.seed);
  c.validate();
  return c;
}

bool operator==(const BackboneConfig& a, const BackboneConfig& b) noexcept {
  return a.model_dim == b.model_dim && a.enc_layers == b.enc_layers &&
         a.act_layers == b.act_layers && a.heads == b.heads && a.vocab_size == b.vocab_size &&
         a.max_instr_len == b.max_instr_len && a.obs_dim == b.obs_dim &&
         a.proprio_dim == b.proprio_dim && a.chunk_horizon == b.chunk_horizon &&
         a.action_dim == b.action_dim && a.seed == b.seed;
}

const char* to_string(LayerKind kind) noexcept {
  switch (kind) {
    case LayerKind::attn_q: return "attn_q";
    case LayerKind::attn_k: return "attn_k";
    case LayerKind::attn_v: return "attn_v";
    case LayerKind::attn_o: return "attn_o";
    case LayerKind::mlp: return "mlp";
    case LayerKind::embed: return "embed";
    case LayerKind::out_proj: return "out_proj";
  }
  return "unknown";
}

LayerKind layer_kind_from_string(std::string_view name) {
  static constexpr std::array<LayerKind, 7> kAll = {
      LayerKind::attn_q, LayerKind::attn_k, LayerKind::attn_v, LayerKind::attn_o,
      LayerKind::mlp,    LayerKind::embed,  LayerKind::out_proj};
  for (const LayerKind k : kAll) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorKind::format, fmt::format("unknown layer kind '{}'", name));
}

std::vector<LayerSpec> layer_schema(const BackboneConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.model_dim;
  const std::size_t h = cfg.mlp_hidden();
  std::vector<LayerSpec> out;
  out.push_back({"enc.embed.tok", LayerKind::embed, cfg.vocab_size, d});
  out.push_back({"enc.embed.pos", LayerKind::embed, cfg.seq_len(), d});
  out.push_back({"enc.embed.obs", LayerKind::embed, cfg.obs_dim, d});
  for (std::size_t i = 0; i < cfg.enc_layers; ++i) {
    const std::string p = "enc." + std::to_string(i);
    out.push_back({p + ".attn.q", LayerKind::attn_q, d, d});
    out.push_back({p + ".attn.k", LayerKind::attn_k, d, d});
    out.push_back({p + ".attn.v", LayerKind::attn_v, d, d});
    out.push_back({p + ".attn.o", LayerKind::attn_o, d, d});
    out.push_back({p + ".mlp.fc1", LayerKind::mlp, d, h});
    out.push_back({p + ".mlp.fc2", LayerKind::mlp, h, d});
  }
  out.push_back({"act.queries", LayerKind::embed, cfg.chunk_horizon, d});
  out.push_back({"act.embed.proprio", LayerKind::embed, cfg.proprio_dim, d});
  for (std::size_t i = 0; i < cfg.act_layers; ++i) {
    const std::string p = "act." + std::to_string(i);
    out.push_back({p + ".attn.q", LayerKind::attn_q, d, d});
    out.push_back({p + ".attn.k", LayerKind::attn_k, d, d});
    out.push_back({p + ".attn.v", LayerKind::attn_v, d, d});
    out.push_back({p + ".attn.o", LayerKind::attn_o, d, d});
    out.push_back({p + ".mlp.fc1", LayerKind::mlp, d, h});
    out.push_back({p + ".mlp.fc2", LayerKind::mlp, h, d});
  }
  out.push_back({"act.out", LayerKind::out_proj, d, cfg.action_dim});
  return out;
}

std::size_t param_count(const BackboneConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.model_dim;
  // per transformer block: q,k,v,o (4 d^2) + fc1/fc2 (2 * 4 d^2)
  const std::size_t per_block = 12 * d * d;
  return cfg.vocab_size * d + cfg.seq_len() * d + cfg.obs_dim * d +
         cfg.enc_layers * per_block + cfg.chunk_horizon * d + cfg.proprio_dim * d +
         cfg.act_layers * per_block + d * cfg.action_dim;
}

// ---------------------------------------------------------------------------
// BackboneWeights

void BackboneWeights::rebuild_index() {
  index_.clear();
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    index_.emplace(layers_[i].name, i);
  }
}

BackboneWeights BackboneWeights::init(const BackboneConfig& config) {
  config.validate();
  BackboneWeights w;
  w.cfg_ = config;
  Rng rng(config.seed);
  for (const LayerSpec& spec : layer_schema(config)) {
    w.layers_.push_back({spec.name, spec.kind, gaussian<float>(rng, spec.rows, spec.cols, 0.02f)});
  }
  w.rebuild_index();
  return w;
}

BackboneWeights BackboneWeights::assemble(const BackboneConfig& config,
                                          std::vector<Matrix> weights_in_schema_order,
                                          bool frozen) {
  const auto schema = layer_schema(config);
  if (weights_in_schema_order.size() != schema.size()) {
    throw Error(ErrorKind::format,
                fmt::format("assemble: got {} layers, schema requires {}",
                            weights_in_schema_order.size(), schema.size()));
  }
  BackboneWeights w;
  w.cfg_ = config;
  for (std::size_t i = 0; i < schema.size(); ++i) {
    Matrix& m = weights_in_schema_order[i];
    if (m.rows != schema[i].rows || m.cols != schema[i].cols) {
      throw Error(ErrorKind::format,
                  fmt::format("assemble: layer {} has shape {}, expected {}x{}", schema[i].name,
                              m.shape_str(), schema[i].rows, schema[i].cols));
    }
    w.layers_.push_back({schema[i].name, schema[i].kind, std::move(m)});
  }
  w.frozen_ = frozen;
  w.rebuild_index();
  return w;
}

const LayerWeights& BackboneWeights::layer(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error(ErrorKind::not_found, fmt::format("unknown layer '{}'", name));
  }
  return layers_[it->second];
}

bool BackboneWeights::has_layer(std::string_view name) const noexcept {
  return index_.find(name) != index_.end();
}

Matrix& BackboneWeights::trainable_weight(std::string_view name) {
  if (frozen_) {
    throw Error(ErrorKind::contract,
                fmt::format("weights are frozen; cannot train layer '{}'", name));
  }
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw Error(ErrorKind::not_found, fmt::format("unknown layer '{}'", name));
  }
  return layers_[it->second].weight;
}

BackboneWeights BackboneWeights::unfrozen_clone() const {
  BackboneWeights w = *this;
  w.frozen_ = false;
  return w;
}

BackboneWeights BackboneWeights::with_replaced(
    const std::vector<std::pair<std::string, Matrix>>& replacements) const {
  BackboneWeights w = *this;
  for (const auto& [name, mat] : replacements) {
    auto it = w.index_.find(name);
    if (it == w.index_.end()) {
      throw Error(ErrorKind::not_found, fmt::format("unknown layer '{}'", name));
    }
    Matrix& dst = w.layers_[it->second].weight;
    if (!same_shape(dst, mat)) {
      throw Error(ErrorKind::shape, fmt::format("layer '{}': replacement shape {} != {}", name,
                                                mat.shape_str(), dst.shape_str()));
    }
    dst = mat;
  }
  return w;
}

bool byte_equal(const BackboneWeights& a, const BackboneWeights& b) noexcept {
  if (!(a.cfg_ == b.cfg_) || a.layers_.size() != b.layers_.size()) return false;
  for (std::size_t i = 0; i < a.layers_.size(); ++i) {
    if (a.layers_[i].name != b.layers_[i].name) return false;
    if (!bytes_equal(a.layers_[i].weight, b.layers_[i].weight)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Vocabulary and tokenizer

namespace {

const std::vector<std::string>& builtin_words() {
  // id 0 is the pad token; the rest is a small manipulation vocabulary so
  // synthetic instructions read like real robot commands.
  static const std::vector<std::string> kWords = {
      "<pad>",    "close",  "open",   "pick",   "place",   "press",  "fold",
      "insert",   "arrange", "discard", "empty", "uncap",   "push",   "pull",
      "lift",     "grasp",  "drop",   "turn",   "slide",   "stack",  "wipe",
      "the",      "a",      "book",   "tissue", "pen",     "trash",  "bottle",
      "shirt",    "straw",  "carton", "door",   "button",  "drawer", "cup",
      "bowl",     "plate",  "box",    "lid",    "cloth",   "tray",   "block",
      "cube",     "red",    "blue",   "green",  "left",    "right",  "front",
      "back",     "top",    "bottom", "into",   "onto",    "from",   "with",
      "and",      "then",   "slowly", "gently", "floor",   "one",    "two",
      "three",
  };
  return kWords;
}

}  // namespace

std::string vocab_word(std::size_t id) {
  const auto& words = builtin_words();
  if (id < words.size()) return words[id];
  return fmt::format("w{}", id);
}

std::optional<std::uint32_t> vocab_lookup(std::string_view word, std::size_t vocab_size) {
  const auto& words = builtin_words();
  for (std::size_t i = 0; i < words.size() && i < vocab_size; ++i) {
    if (word == words[i]) return static_cast<std::uint32_t>(i);
  }
  // synthetic fallback names for large vocabularies
  if (word.size() > 1 && word[0] == 'w') {
    std::uint32_t id = 0;
    bool digits = true;
    for (const char c : word.substr(1)) {
      if (!std::isdigit(static_cast<unsigned char>(c))) {
        digits = false;
        break;
      }
      id = id * 10 + static_cast<std::uint32_t>(c - '0');
    }
    if (digits && id >= builtin_words().size() && id < vocab_size) return id;
  }
  return std::nullopt;
}

std::string normalize_instruction(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_space = true;  // swallow leading whitespace
  for (const char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      in_space = true;
      continue;
    }
    if (in_space && !out.empty()) out += ' ';
    in_space = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

Instruction Instruction::from_text(const BackboneConfig& config, std::string_view text) {
  const std::string norm = normalize_instruction(text);
  std::vector<std::uint32_t> tokens;
  std::size_t pos = 0;
  while (pos < norm.size()) {
    std::size_t end = norm.find(' ', pos);
    if (end == std::string::npos) end = norm.size();
    const std::string_view word = std::string_view(norm).substr(pos, end - pos);
    pos = end + 1;
    const auto id = vocab_lookup(word, config.vocab_size);
    if (!id) {
      throw Error(ErrorKind::config, fmt::format("instruction word '{}' not in vocabulary", word));
    }
    tokens.push_back(*id);
  }
  return from_tokens(config, std::move(tokens), std::string(text));
}

Instruction Instruction::from_tokens(const BackboneConfig& config,
                                     std::vector<std::uint32_t> tokens, std::string raw_text) {
  if (tokens.size() > config.max_instr_len) {
    throw Error(ErrorKind::shape, fmt::format("instruction has {} tokens, max is {}",
                                              tokens.size(), config.max_instr_len));
  }
  for (const std::uint32_t t : tokens) {
    if (t >= config.vocab_size) {
      throw Error(ErrorKind::shape,
                  fmt::format("token id {} out of range (vocab {})", t, config.vocab_size));
    }
  }
  tokens.resize(config.max_instr_len, 0);  // zero-pad
  Instruction instr;
  instr.raw_text = std::move(raw_text);
  instr.tokens = std::move(tokens);
  return instr;
}

bool operator==(const ActionChunk& a, const ActionChunk& b) noexcept {
  if (!same_shape(a.actions, b.actions)) return false;
  for (std::size_t i = 0; i < a.actions.size(); ++i) {
    if (a.actions.data[i] != b.actions.data[i]) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Forward paths

namespace detail {

WeightsRef<float> make_ref(const BackboneWeights& w) {
  return build_ref<float>(w.config(), [&w](const std::string& n) { return &w.weight(n); });
}

OwnedTable<double> widen_table(const BackboneWeights& w) {
  OwnedTable<double> t;
  t.cfg = w.config();
  for (const LayerWeights& l : w.layers()) {
    t.mats.emplace(l.name, widen(l.weight));
  }
  return t;
}

}  // namespace detail

namespace {

void check_request_dims(const BackboneConfig& cfg, const Instruction& instr,
                        const Observation& obs) {
  if (instr.tokens.size() != cfg.max_instr_len) {
    throw Error(ErrorKind::shape, fmt::format("instruction has {} tokens, expected {}",
                                              instr.tokens.size(), cfg.max_instr_len));
  }
  for (const std::uint32_t t : instr.tokens) {
    if (t >= cfg.vocab_size) {
      throw Error(ErrorKind::shape,
                  fmt::format("token id {} out of range (vocab {})", t, cfg.vocab_size));
    }
  }
  if (obs.features.size() != cfg.obs_dim) {
    throw Error(ErrorKind::shape, fmt::format("observation length {}, expected {}",
                                              obs.features.size(), cfg.obs_dim));
  }
  if (obs.proprio.size() != cfg.proprio_dim) {
    throw Error(ErrorKind::shape, fmt::format("proprio length {}, expected {}",
                                              obs.proprio.size(), cfg.proprio_dim));
  }
}

}  // namespace

Matrix encode(const BackboneWeights& weights, const Instruction& instr, const Observation& obs) {
  check_request_dims(weights.config(), instr, obs);
  const auto ref = detail::make_ref(weights);
  Matrix z = detail::encode_net<float>(weights.config(), ref, instr.tokens, obs.features,
                                       nullptr, nullptr);
  check_finite(z, "encode");
  return z;
}

ActionChunk act(const BackboneWeights& weights, const Matrix& z,
                const std::vector<float>& proprio) {
  const BackboneConfig& cfg = weights.config();
  if (z.rows != cfg.seq_len() || z.cols != cfg.model_dim) {
    throw Error(ErrorKind::shape, fmt::format("encoder output shape {}, expected {}x{}",
                                              z.shape_str(), cfg.seq_len(), cfg.model_dim));
  }
  if (proprio.size() != cfg.proprio_dim) {
    throw Error(ErrorKind::shape,
                fmt::format("proprio length {}, expected {}", proprio.size(), cfg.proprio_dim));
  }
  const auto ref = detail::make_ref(weights);
  ActionChunk chunk{detail::act_net<float>(cfg, ref, z, proprio, nullptr, nullptr)};
  check_finite(chunk.actions, "act");
  return chunk;
}

ActionChunk forward(const BackboneWeights& weights, const Instruction& instr,
                    const Observation& obs, std::uint64_t* mac_count) {
  check_request_dims(weights.config(), instr, obs);
  const auto ref = detail::make_ref(weights);
  ActionChunk chunk{detail::forward_net<float>(weights.config(), ref, instr.tokens, obs.features,
                                               obs.proprio, nullptr, mac_count)};
  check_finite(chunk.actions, "forward");
  return chunk;
}

}  // namespace coral
