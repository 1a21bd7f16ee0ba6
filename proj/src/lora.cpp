// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#include "coral/lora.hpp"

#include <fmt/format.h>

#include "coral/expert_store.hpp"
#include "coral/rng.hpp"

namespace coral {

std::vector<std::string> InjectionPolicy::targets(const BackboneConfig& config) const {
  if (kinds.empty() || (!encoder && !action_head)) {
    throw Error(ErrorKind::config, "injection policy selects no layers");
  }
  std::vector<std::string> out;
  for (const LayerSpec& spec : layer_schema(config)) {
    if (!kinds.count(spec.kind)) continue;
    const bool in_enc = spec.name.rfind("enc.", 0) == 0;
    if ((in_enc && encoder) || (!in_enc && action_head)) {
      out.push_back(spec.name);
    }
  }
  if (out.empty()) {
    throw Error(ErrorKind::config, fmt::format("injection policy '{}' matches no layers",
                                               describe()));
  }
  return out;
}

std::string InjectionPolicy::describe() const {
  std::string kinds_str;
  for (const LayerKind k : kinds) {
    if (!kinds_str.empty()) kinds_str += '+';
    kinds_str += to_string(k);
  }
  std::string where;
  if (encoder) where += "enc";
  if (action_head) {
    if (!where.empty()) where += '+';
    where += "act";
  }
  return kinds_str + "@" + where;
}

InjectionPolicy InjectionPolicy::parse(std::string_view text) {
  const std::size_t at = text.find('@');
  if (at == std::string_view::npos) {
    throw Error(ErrorKind::format, fmt::format("bad injection policy '{}'", text));
  }
  InjectionPolicy p;
  p.kinds.clear();
  p.encoder = p.action_head = false;
  auto split = [](std::string_view s, auto&& fn) {
    std::size_t pos = 0;
    while (pos <= s.size()) {
      std::size_t end = s.find('+', pos);
      if (end == std::string_view::npos) end = s.size();
      if (end > pos) fn(s.substr(pos, end - pos));
      pos = end + 1;
    }
  };
  split(text.substr(0, at), [&](std::string_view k) { p.kinds.insert(layer_kind_from_string(k)); });
  split(text.substr(at + 1), [&](std::string_view w) {
    if (w == "enc") {
      p.encoder = true;
    } else if (w == "act") {
      p.action_head = true;
    } else {
      throw Error(ErrorKind::format, fmt::format("bad injection component '{}'", w));
    }
  });
  if (p.kinds.empty() || (!p.encoder && !p.action_head)) {
    throw Error(ErrorKind::format, fmt::format("bad injection policy '{}'", text));
  }
  return p;
}

const LoraExpert::Delta& LoraExpert::delta_for(std::string_view layer) const {
  for (const auto& [name, d] : deltas) {
    if (name == layer) return d;
  }
  throw Error(ErrorKind::not_found,
              fmt::format("expert '{}' has no layer '{}'", expert_id, layer));
}

bool LoraExpert::has_layer(std::string_view layer) const noexcept {
  for (const auto& [name, d] : deltas) {
    if (name == layer) return true;
  }
  return false;
}

LoraExpert init_expert(const BackboneConfig& config, const InjectionPolicy& policy,
                       std::uint32_t rank, float alpha, std::uint64_t seed) {
  if (rank < 1) throw Error(ErrorKind::config, "lora rank must be >= 1");
  if (!(alpha > 0)) throw Error(ErrorKind::config, "lora alpha must be > 0");

  const auto schema = layer_schema(config);
  auto shape_of = [&](const std::string& name) {
    for (const LayerSpec& s : schema) {
      if (s.name == name) return std::pair<std::size_t, std::size_t>(s.rows, s.cols);
    }
    throw Error(ErrorKind::not_found, fmt::format("unknown layer '{}'", name));
  };

  LoraExpert e;
  e.rank = rank;
  e.alpha = alpha;
  e.meta["policy"] = policy.describe();
  e.meta["seed"] = std::to_string(seed);
  Rng rng(seed);
  for (const std::string& name : policy.targets(config)) {
    const auto [d, m] = shape_of(name);
    LoraExpert::Delta delta;
    delta.a = gaussian<float>(rng, rank, m, 0.02f);
    delta.b = Matrix(d, rank);  // zeros: initial update is exactly zero
    e.deltas.emplace_back(name, std::move(delta));
  }
  return e;
}

Matrix delta(const LoraExpert& expert, std::string_view layer) {
  const LoraExpert::Delta& d = expert.delta_for(layer);
  Matrix prod = matmul(d.b, d.a);
  for (auto& v : prod.data) v *= expert.scale();
  return prod;
}

BackboneWeights merge(const BackboneWeights& weights, const LoraExpert& expert) {
  if (!weights.frozen()) {
    throw Error(ErrorKind::contract, "merge requires a frozen weight table");
  }
  const std::uint64_t fp = fingerprint(weights);
  if (expert.base_fingerprint != fp) {
    throw Error(ErrorKind::stale_expert,
                fmt::format("expert '{}' was trained against base {:016x}, serving base is {:016x}",
                            expert.expert_id, expert.base_fingerprint, fp));
  }
  std::vector<std::pair<std::string, Matrix>> replaced;
  replaced.reserve(expert.deltas.size());
  for (const auto& [name, d] : expert.deltas) {
    if (!weights.has_layer(name)) {
      throw Error(ErrorKind::format,
                  fmt::format("expert '{}' targets unknown layer '{}'", expert.expert_id, name));
    }
    const Matrix& w = weights.weight(name);
    if (d.b.rows != w.rows || d.a.cols != w.cols || d.a.rows != expert.rank ||
        d.b.cols != expert.rank) {
      throw Error(ErrorKind::format,
                  fmt::format("expert '{}' layer '{}': A {} B {} incompatible with W {}",
                              expert.expert_id, name, d.a.shape_str(), d.b.shape_str(),
                              w.shape_str()));
    }
    replaced.emplace_back(name, add_scaled(w, matmul(d.b, d.a), expert.scale()));
  }
  return weights.with_replaced(replaced);
}

std::size_t expert_param_count(const LoraExpert& expert) {
  std::size_t total = 0;
  for (const auto& [name, d] : expert.deltas) {
    total += d.a.size() + d.b.size();  // r*(d+m)
  }
  return total;
}

double compression_ratio(const BackboneConfig& config, const LoraExpert& expert) {
  const std::size_t ep = expert_param_count(expert);
  if (ep == 0) {
    throw Error(ErrorKind::config, "compression ratio undefined for an empty expert");
  }
  return static_cast<double>(param_count(config)) / static_cast<double>(ep);
}

}  // namespace coral
