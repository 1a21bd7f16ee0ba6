// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#include "coral/expert_store.hpp"

#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "coral/hash.hpp"

namespace coral {

namespace {

// little-endian primitives

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

void put_floats(std::vector<std::uint8_t>& out, const Matrix& m) {
  out.reserve(out.size() + m.size() * 4);
  for (const float v : m.data) put_f32(out, v);
}

// Bounds-checked reader. Every overrun is a format error, so truncated files
// fail with a typed error before any payload is trusted.
class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::size_t pos() const noexcept { return pos_; }
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (remaining() < n) {
      throw Error(ErrorKind::format,
                  fmt::format("truncated container: need {} bytes for {}, have {}", n, what,
                              remaining()));
    }
    const std::uint8_t* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint8_t u8(const char* what) { return *take(1, what); }

  std::uint16_t u16(const char* what) {
    const std::uint8_t* p = take(2, what);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }

  std::uint32_t u32(const char* what) {
    const std::uint8_t* p = take(4, what);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }

  std::uint64_t u64(const char* what) {
    std::uint64_t v = 0;
    const std::uint8_t* p = take(8, what);
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return v;
  }

  std::string str(std::size_t n, const char* what) {
    const std::uint8_t* p = take(n, what);
    return std::string(reinterpret_cast<const char*>(p), n);
  }

  Matrix floats(std::size_t rows, std::size_t cols, const char* what) {
    if (cols != 0 && rows > remaining() / (4 * cols)) {
      throw Error(ErrorKind::format,
                  fmt::format("truncated container: {}x{} f32 payload for {} exceeds file", rows,
                              cols, what));
    }
    Matrix m(rows, cols);
    const std::uint8_t* p = take(rows * cols * 4, what);
    for (std::size_t i = 0; i < m.size(); ++i) {
      std::uint32_t bits = static_cast<std::uint32_t>(p[4 * i]) |
                           (static_cast<std::uint32_t>(p[4 * i + 1]) << 8) |
                           (static_cast<std::uint32_t>(p[4 * i + 2]) << 16) |
                           (static_cast<std::uint32_t>(p[4 * i + 3]) << 24);
      std::memcpy(&m.data[i], &bits, 4);
    }
    return m;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_container(const Container& c) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kContainerMagic, kContainerMagic + 4);
  put_u16(out, kContainerVersion);
  out.push_back(c.kind);
  out.push_back(0);  // flags
  const std::string meta = format_kv(c.meta);
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.insert(out.end(), meta.begin(), meta.end());
  put_u32(out, static_cast<std::uint32_t>(c.entries.size()));
  for (const ContainerEntry& e : c.entries) {
    if (e.name.size() > 0xFFFF) {
      throw Error(ErrorKind::format, fmt::format("entry name too long: {}", e.name.size()));
    }
    put_u16(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    if (e.rank == 0) {
      put_u32(out, static_cast<std::uint32_t>(e.full.rows));
      put_u32(out, static_cast<std::uint32_t>(e.full.cols));
      put_u32(out, 0);
      put_floats(out, e.full);
    } else {
      put_u32(out, static_cast<std::uint32_t>(e.b.rows));
      put_u32(out, static_cast<std::uint32_t>(e.a.cols));
      put_u32(out, e.rank);
      put_floats(out, e.a);
      put_floats(out, e.b);
    }
  }
  put_u64(out, fnv1a64(out.data(), out.size()));
  return out;
}

Container parse_container(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const std::string magic = r.str(4, "magic");
  if (std::memcmp(magic.data(), kContainerMagic, 4) != 0) {
    throw Error(ErrorKind::format, "not a CRLX container (bad magic)");
  }
  const std::uint16_t version = r.u16("version");
  if (version != kContainerVersion) {
    throw Error(ErrorKind::unsupported_version,
                fmt::format("container version {} not supported (expected {})", version,
                            kContainerVersion));
  }
  Container c;
  c.kind = r.u8("kind");
  if (c.kind > kKindTaskData) {
    throw Error(ErrorKind::format, fmt::format("unknown container kind {}", c.kind));
  }
  r.u8("flags");
  const std::uint32_t meta_len = r.u32("metadata length");
  c.meta = parse_kv(r.str(meta_len, "metadata"));
  const std::uint32_t n_entries = r.u32("entry count");
  c.entries.reserve(std::min<std::uint32_t>(n_entries, 4096));
  for (std::uint32_t i = 0; i < n_entries; ++i) {
    ContainerEntry e;
    const std::uint16_t name_len = r.u16("entry name length");
    e.name = r.str(name_len, "entry name");
    const std::uint32_t d = r.u32("entry rows");
    const std::uint32_t m = r.u32("entry cols");
    e.rank = r.u32("entry rank");
    if (e.rank == 0) {
      e.full = r.floats(d, m, e.name.c_str());
    } else {
      e.a = r.floats(e.rank, m, e.name.c_str());
      e.b = r.floats(d, e.rank, e.name.c_str());
    }
    c.entries.push_back(std::move(e));
  }
  const std::uint64_t computed = fnv1a64(bytes.data(), r.pos());
  const std::uint64_t stored = r.u64("trailer digest");
  if (r.remaining() != 0) {
    throw Error(ErrorKind::format,
                fmt::format("{} trailing bytes after container trailer", r.remaining()));
  }
  if (stored != computed) {
    throw Error(ErrorKind::corruption,
                fmt::format("container checksum mismatch: stored {:016x}, computed {:016x}",
                            stored, computed));
  }
  return c;
}

void write_container(const Container& c, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = serialize_container(c);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorKind::io, fmt::format("cannot open '{}' for writing", tmp.string()));
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      throw Error(ErrorKind::io, fmt::format("short write to '{}'", tmp.string()));
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorKind::io,
                fmt::format("rename '{}' -> '{}': {}", tmp.string(), path.string(), ec.message()));
  }
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::io, fmt::format("cannot open '{}'", path.string()));
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (!in.good() && !in.eof()) {
    throw Error(ErrorKind::io, fmt::format("read failure on '{}'", path.string()));
  }
  return parse_container(bytes);
}

// ---------------------------------------------------------------------------
// Adapters

namespace {

KvMap expert_meta(const LoraExpert& expert) {
  KvMap meta = expert.meta;
  meta["expert_id"] = expert.expert_id;
  meta["r"] = std::to_string(expert.rank);
  meta["alpha"] = fmt::format("{}", expert.alpha);
  meta["base_fingerprint"] = fmt::format("{:016x}", expert.base_fingerprint);
  return meta;
}

Container expert_container(const LoraExpert& expert) {
  Container c;
  c.kind = kKindAdapter;
  c.meta = expert_meta(expert);
  for (const auto& [name, d] : expert.deltas) {
    ContainerEntry e;
    e.name = name;
    e.rank = expert.rank;
    e.a = d.a;
    e.b = d.b;
    c.entries.push_back(std::move(e));
  }
  return c;
}

}  // namespace

void save_expert(const LoraExpert& expert, const std::filesystem::path& path) {
  write_container(expert_container(expert), path);
}

namespace {

LoraExpert expert_from_container(Container&& c, const std::string& where) {
  if (c.kind != kKindAdapter) {
    throw Error(ErrorKind::format,
                fmt::format("{}: container kind {} is not an adapter", where, c.kind));
  }
  LoraExpert e;
  e.expert_id = kv_get(c.meta, "expert_id");
  e.rank = static_cast<std::uint32_t>(kv_get_u64(c.meta, "r"));
  e.alpha = static_cast<float>(kv_get_f64(c.meta, "alpha"));
  if (e.rank < 1 || !(e.alpha > 0)) {
    throw Error(ErrorKind::format, fmt::format("{}: invalid rank/alpha", where));
  }
  {
    const std::string fp = kv_get(c.meta, "base_fingerprint");
    try {
      std::size_t used = 0;
      e.base_fingerprint = std::stoull(fp, &used, 16);
      if (used != fp.size()) throw std::invalid_argument(fp);
    } catch (const std::exception&) {
      throw Error(ErrorKind::format, fmt::format("{}: bad base_fingerprint '{}'", where, fp));
    }
  }
  for (auto& [key, value] : c.meta) {
    if (key != "expert_id" && key != "r" && key != "alpha" && key != "base_fingerprint") {
      e.meta[key] = value;
    }
  }
  for (ContainerEntry& entry : c.entries) {
    if (entry.rank != e.rank) {
      throw Error(ErrorKind::format,
                  fmt::format("{}: entry '{}' rank {} != adapter rank {}", where, entry.name,
                              entry.rank, e.rank));
    }
    e.deltas.emplace_back(std::move(entry.name),
                          LoraExpert::Delta{std::move(entry.a), std::move(entry.b)});
  }
  return e;
}

}  // namespace

LoraExpert load_expert(const std::filesystem::path& path) {
  return expert_from_container(read_container(path), path.string());
}

std::size_t expert_size_bytes(const LoraExpert& expert) {
  return serialize_container(expert_container(expert)).size();
}

std::size_t expected_adapter_file_size(const LoraExpert& expert) {
  // magic(4) + version(2) + kind(1) + flags(1) + meta length(4) + entry count(4)
  std::size_t total = 16 + format_kv(expert_meta(expert)).size();
  for (const auto& [name, d] : expert.deltas) {
    total += 2 + name.size() + 12;            // name + d/m/r fields
    total += 4 * (d.a.size() + d.b.size());   // f32 payload
  }
  return total + 8;  // trailer
}

// ---------------------------------------------------------------------------
// Base checkpoints

void save_backbone(const BackboneWeights& weights, const std::filesystem::path& path) {
  Container c;
  c.kind = kKindBase;
  c.meta = weights.config().to_kv();
  c.meta["frozen"] = weights.frozen() ? "1" : "0";
  for (const LayerWeights& l : weights.layers()) {
    ContainerEntry e;
    e.name = l.name;
    e.rank = 0;
    e.full = l.weight;
    c.entries.push_back(std::move(e));
  }
  write_container(c, path);
}

BackboneWeights load_backbone(const std::filesystem::path& path) {
  Container c = read_container(path);
  if (c.kind != kKindBase) {
    throw Error(ErrorKind::format,
                fmt::format("{}: container kind {} is not a base checkpoint", path.string(),
                            c.kind));
  }
  const BackboneConfig cfg = BackboneConfig::from_kv(c.meta);
  const bool frozen = kv_get_or(c.meta, "frozen", "0") == "1";
  const auto schema = layer_schema(cfg);
  if (c.entries.size() != schema.size()) {
    throw Error(ErrorKind::format,
                fmt::format("{}: {} layers in file, config requires {}", path.string(),
                            c.entries.size(), schema.size()));
  }
  std::vector<Matrix> mats;
  mats.reserve(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    if (c.entries[i].name != schema[i].name || c.entries[i].rank != 0) {
      throw Error(ErrorKind::format,
                  fmt::format("{}: layer {} is '{}', expected '{}'", path.string(), i,
                              c.entries[i].name, schema[i].name));
    }
    mats.push_back(std::move(c.entries[i].full));
  }
  return BackboneWeights::assemble(cfg, std::move(mats), frozen);
}

std::uint64_t fingerprint(const BackboneWeights& weights) {
  Fnv64 h;
  h.update(format_kv(weights.config().to_kv()));
  for (const LayerWeights& l : weights.layers()) {
    h.update(l.name);
    const char zero = 0;
    h.update(&zero, 1);
    const std::uint32_t dims[2] = {static_cast<std::uint32_t>(l.weight.rows),
                                   static_cast<std::uint32_t>(l.weight.cols)};
    h.update(dims, sizeof(dims));
    h.update(l.weight.data.data(), l.weight.data.size() * sizeof(float));
  }
  return h.digest();
}

// ---------------------------------------------------------------------------
// Registry

void ExpertRegistry::index_entries() {
  by_instruction_.clear();
  by_id_.clear();
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const RegistryEntry& e = entries_[i];
    auto [it, inserted] = by_instruction_.emplace(e.instruction, i);
    if (!inserted) {
      const RegistryEntry& other = entries_[it->second];
      throw Error(ErrorKind::collision,
                  fmt::format("registry collision on '{}': expert '{}' ({}) vs expert '{}' ({})",
                              e.instruction, other.expert_id, other.path, e.expert_id, e.path));
    }
    auto [id_it, id_inserted] = by_id_.emplace(e.expert_id, i);
    if (!id_inserted && entries_[id_it->second].path != e.path) {
      throw Error(ErrorKind::collision,
                  fmt::format("expert id '{}' maps to both '{}' and '{}'", e.expert_id,
                              entries_[id_it->second].path, e.path));
    }
  }
}

ExpertRegistry ExpertRegistry::load(const std::filesystem::path& manifest_path,
                                    RouteMissBehavior behavior) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw Error(ErrorKind::io, fmt::format("cannot open manifest '{}'", manifest_path.string()));
  }
  const std::filesystem::path dir = manifest_path.parent_path();

  ExpertRegistry reg;
  reg.miss_ = behavior;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const std::size_t t1 = line.find('\t');
    const std::size_t t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos ||
        line.find('\t', t2 + 1) != std::string::npos) {
      throw Error(ErrorKind::format,
                  fmt::format("{}:{}: manifest line must be instruction<TAB>id<TAB>path",
                              manifest_path.string(), line_no));
    }
    RegistryEntry e;
    e.instruction = normalize_instruction(line.substr(0, t1));
    e.expert_id = line.substr(t1 + 1, t2 - t1 - 1);
    std::filesystem::path p = line.substr(t2 + 1);
    if (p.is_relative()) p = dir / p;
    e.path = p.string();
    if (e.instruction.empty() || e.expert_id.empty()) {
      throw Error(ErrorKind::format,
                  fmt::format("{}:{}: empty instruction or expert id", manifest_path.string(),
                              line_no));
    }
    reg.entries_.push_back(std::move(e));
  }
  reg.index_entries();

  for (const RegistryEntry& e : reg.entries_) {
    std::error_code ec;
    const auto size = std::filesystem::file_size(e.path, ec);
    if (ec) {
      throw Error(ErrorKind::missing_adapter,
                  fmt::format("adapter '{}' for '{}' is unreadable: {}", e.path, e.instruction,
                              ec.message()));
    }
    LoraExpert adapter;
    try {
      adapter = load_expert(e.path);
    } catch (const Error& err) {
      throw Error(ErrorKind::missing_adapter,
                  fmt::format("adapter '{}' for '{}' failed to load: {}", e.path, e.instruction,
                              err.what()));
    }
    if (adapter.expert_id != e.expert_id) {
      throw Error(ErrorKind::missing_adapter,
                  fmt::format("adapter '{}' carries expert id '{}', manifest says '{}'", e.path,
                              adapter.expert_id, e.expert_id));
    }
    reg.total_bytes_ += size;
  }
  return reg;
}

ExpertRegistry ExpertRegistry::from_entries(std::vector<RegistryEntry> entries,
                                            RouteMissBehavior behavior) {
  ExpertRegistry reg;
  reg.miss_ = behavior;
  reg.entries_ = std::move(entries);
  for (RegistryEntry& e : reg.entries_) {
    e.instruction = normalize_instruction(e.instruction);
  }
  reg.index_entries();
  return reg;
}

const RegistryEntry* ExpertRegistry::lookup(std::string_view normalized_instruction) const noexcept {
  auto it = by_instruction_.find(normalized_instruction);
  return it == by_instruction_.end() ? nullptr : &entries_[it->second];
}

const RegistryEntry* ExpertRegistry::find_expert(std::string_view expert_id) const noexcept {
  auto it = by_id_.find(expert_id);
  return it == by_id_.end() ? nullptr : &entries_[it->second];
}

}  // namespace coral
