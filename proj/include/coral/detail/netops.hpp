// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0
//
// Templated forward/backward engine behind the public backbone and trainer
// APIs. float instantiations serve; double instantiations back the
// verification paths (finite-difference checks, merge oracles). Both share
// one code path so the arithmetic being verified is the arithmetic deployed.

#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "coral/backbone.hpp"
#include "coral/matrix.hpp"

namespace coral::detail {

template <typename T>
using GradMap = std::map<std::string, Mat<T>, std::less<>>;

template <typename T>
void add_grad(GradMap<T>& g, const std::string& name, Mat<T> value) {
  auto it = g.find(name);
  if (it == g.end()) {
    g.emplace(name, std::move(value));
    return;
  }
  for (std::size_t i = 0; i < value.size(); ++i) {
    it->second.data[i] += value.data[i];
  }
}

template <typename T>
void acc_add(Mat<T>& dst, const Mat<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst.data[i] += src.data[i];
  }
}

template <typename T>
void scale_inplace(Mat<T>& m, T s) {
  for (auto& v : m.data) v *= s;
}

// ---------------------------------------------------------------------------
// Resolved weight pointers for one forward/backward pass.

template <typename T>
struct WeightsRef {
  struct Block {
    const Mat<T>*wq, *wk, *wv, *wo, *fc1, *fc2;
  };
  const BackboneConfig* cfg = nullptr;
  const Mat<T>* tok_embed = nullptr;
  const Mat<T>* pos_embed = nullptr;
  const Mat<T>* obs_proj = nullptr;
  std::vector<Block> enc, act;
  const Mat<T>* queries = nullptr;
  const Mat<T>* proprio_proj = nullptr;
  const Mat<T>* out_proj = nullptr;
};

template <typename T, typename Lookup>
WeightsRef<T> build_ref(const BackboneConfig& cfg, Lookup&& lk) {
  WeightsRef<T> r;
  r.cfg = &cfg;
  r.tok_embed = lk("enc.embed.tok");
  r.pos_embed = lk("enc.embed.pos");
  r.obs_proj = lk("enc.embed.obs");
  for (std::size_t i = 0; i < cfg.enc_layers; ++i) {
    const std::string p = "enc." + std::to_string(i);
    r.enc.push_back({lk(p + ".attn.q"), lk(p + ".attn.k"), lk(p + ".attn.v"),
                     lk(p + ".attn.o"), lk(p + ".mlp.fc1"), lk(p + ".mlp.fc2")});
  }
  r.queries = lk("act.queries");
  r.proprio_proj = lk("act.embed.proprio");
  for (std::size_t i = 0; i < cfg.act_layers; ++i) {
    const std::string p = "act." + std::to_string(i);
    r.act.push_back({lk(p + ".attn.q"), lk(p + ".attn.k"), lk(p + ".attn.v"),
                     lk(p + ".attn.o"), lk(p + ".mlp.fc1"), lk(p + ".mlp.fc2")});
  }
  r.out_proj = lk("act.out");
  return r;
}

WeightsRef<float> make_ref(const BackboneWeights& w);

// Owned name->matrix table; map nodes are address-stable, so entries may be
// perturbed in place (finite differences) without invalidating a ref.
template <typename T>
struct OwnedTable {
  BackboneConfig cfg;
  std::map<std::string, Mat<T>, std::less<>> mats;

  WeightsRef<T> make_ref() const {
    return build_ref<T>(cfg, [this](const std::string& n) { return &mats.at(n); });
  }
};

OwnedTable<double> widen_table(const BackboneWeights& w);

// ---------------------------------------------------------------------------
// Elementwise pieces

inline constexpr double kLnEps = 1e-5;
inline constexpr double kGeluC = 0.7978845608028653558;  // sqrt(2/pi)
inline constexpr double kGeluA = 0.044715;

template <typename T>
T gelu(T x) {
  const T u = static_cast<T>(kGeluC) * (x + static_cast<T>(kGeluA) * x * x * x);
  return static_cast<T>(0.5) * x * (T{1} + std::tanh(u));
}

template <typename T>
T gelu_prime(T x) {
  const T u = static_cast<T>(kGeluC) * (x + static_cast<T>(kGeluA) * x * x * x);
  const T t = std::tanh(u);
  const T du = static_cast<T>(kGeluC) * (T{1} + T{3} * static_cast<T>(kGeluA) * x * x);
  return static_cast<T>(0.5) * (T{1} + t) + static_cast<T>(0.5) * x * (T{1} - t * t) * du;
}

// Per-row layer normalization without learned affine. Returns the normalized
// matrix; inv receives 1/sqrt(var + eps) per row for the backward pass.
template <typename T>
Mat<T> ln_rows(const Mat<T>& x, std::vector<T>& inv) {
  Mat<T> y(x.rows, x.cols);
  inv.resize(x.rows);
  const T n = static_cast<T>(x.cols);
  for (std::size_t i = 0; i < x.rows; ++i) {
    const T* xr = x.row(i);
    T mean{};
    for (std::size_t j = 0; j < x.cols; ++j) mean += xr[j];
    mean /= n;
    T var{};
    for (std::size_t j = 0; j < x.cols; ++j) {
      const T c = xr[j] - mean;
      var += c * c;
    }
    var /= n;
    const T iv = T{1} / std::sqrt(var + static_cast<T>(kLnEps));
    inv[i] = iv;
    T* yr = y.row(i);
    for (std::size_t j = 0; j < x.cols; ++j) yr[j] = (xr[j] - mean) * iv;
  }
  return y;
}

// dx for y = LN(x): dx = inv * (dy - mean(dy) - y * mean(dy .* y)), per row.
template <typename T>
Mat<T> ln_backward(const Mat<T>& dy, const Mat<T>& y, const std::vector<T>& inv) {
  Mat<T> dx(dy.rows, dy.cols);
  const T n = static_cast<T>(dy.cols);
  for (std::size_t i = 0; i < dy.rows; ++i) {
    const T* dyr = dy.row(i);
    const T* yr = y.row(i);
    T m1{}, m2{};
    for (std::size_t j = 0; j < dy.cols; ++j) {
      m1 += dyr[j];
      m2 += dyr[j] * yr[j];
    }
    m1 /= n;
    m2 /= n;
    T* dxr = dx.row(i);
    for (std::size_t j = 0; j < dy.cols; ++j) {
      dxr[j] = inv[i] * (dyr[j] - m1 - yr[j] * m2);
    }
  }
  return dx;
}

template <typename T>
void softmax_rows(Mat<T>& s) {
  for (std::size_t i = 0; i < s.rows; ++i) {
    T* r = s.row(i);
    T mx = r[0];
    for (std::size_t j = 1; j < s.cols; ++j) mx = std::max(mx, r[j]);
    T sum{};
    for (std::size_t j = 0; j < s.cols; ++j) {
      r[j] = std::exp(r[j] - mx);
      sum += r[j];
    }
    for (std::size_t j = 0; j < s.cols; ++j) r[j] /= sum;
  }
}

// ds for p = softmax(s): ds = p .* (dp - <dp, p>), per row.
template <typename T>
Mat<T> softmax_backward(const Mat<T>& p, const Mat<T>& dp) {
  Mat<T> ds(p.rows, p.cols);
  for (std::size_t i = 0; i < p.rows; ++i) {
    const T* pr = p.row(i);
    const T* dpr = dp.row(i);
    T dot{};
    for (std::size_t j = 0; j < p.cols; ++j) dot += pr[j] * dpr[j];
    T* dsr = ds.row(i);
    for (std::size_t j = 0; j < p.cols; ++j) dsr[j] = pr[j] * (dpr[j] - dot);
  }
  return ds;
}

template <typename T>
Mat<T> take_head(const Mat<T>& m, std::size_t h, std::size_t dh) {
  Mat<T> out(m.rows, dh);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const T* src = m.row(i) + h * dh;
    T* dst = out.row(i);
    for (std::size_t j = 0; j < dh; ++j) dst[j] = src[j];
  }
  return out;
}

template <typename T>
void put_head(Mat<T>& dst, const Mat<T>& src, std::size_t h, std::size_t dh) {
  for (std::size_t i = 0; i < src.rows; ++i) {
    T* d = dst.row(i) + h * dh;
    const T* s = src.row(i);
    for (std::size_t j = 0; j < dh; ++j) d[j] = s[j];
  }
}

// ---------------------------------------------------------------------------
// Attention (self when nq == nkv, cross otherwise)

template <typename T>
struct AttnTrace {
  Mat<T> q, k, v;
  std::vector<Mat<T>> probs;  // one n x m matrix per head
  Mat<T> concat;
};

template <typename T>
Mat<T> attention_fwd(std::size_t heads, const Mat<T>& nq, const Mat<T>& nkv,
                     const typename WeightsRef<T>::Block& w, AttnTrace<T>* tr,
                     std::uint64_t* macs) {
  auto mm = [&](const Mat<T>& a, const Mat<T>& b) {
    if (macs) *macs += a.rows * a.cols * b.cols;
    return matmul(a, b);
  };
  const std::size_t d = nq.cols;
  const std::size_t dh = d / heads;
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dh));

  Mat<T> q = mm(nq, *w.wq);
  Mat<T> k = mm(nkv, *w.wk);
  Mat<T> v = mm(nkv, *w.wv);
  Mat<T> concat(nq.rows, d);
  std::vector<Mat<T>> probs;
  probs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    Mat<T> qh = take_head(q, h, dh);
    Mat<T> kh = take_head(k, h, dh);
    Mat<T> vh = take_head(v, h, dh);
    Mat<T> s = mm(qh, transpose(kh));
    scale_inplace(s, inv_sqrt);
    softmax_rows(s);
    Mat<T> ctx = mm(s, vh);
    put_head(concat, ctx, h, dh);
    probs.push_back(std::move(s));
  }
  Mat<T> att = mm(concat, *w.wo);
  if (tr) {
    tr->q = std::move(q);
    tr->k = std::move(k);
    tr->v = std::move(v);
    tr->probs = std::move(probs);
    tr->concat = std::move(concat);
  }
  return att;
}

// Accumulates weight grads into g (names name_q..name_o) and input grads into
// dnq / dnkv. For self-attention pass the same matrix for both accumulators.
template <typename T>
void attention_bwd(std::size_t heads, const Mat<T>& nq, const Mat<T>& nkv,
                   const typename WeightsRef<T>::Block& w, const AttnTrace<T>& tr,
                   const Mat<T>& datt, const std::string& prefix, GradMap<T>& g,
                   Mat<T>& dnq, Mat<T>& dnkv) {
  const std::size_t d = nq.cols;
  const std::size_t dh = d / heads;
  const T inv_sqrt = T{1} / std::sqrt(static_cast<T>(dh));

  add_grad(g, prefix + ".attn.o", matmul(transpose(tr.concat), datt));
  Mat<T> dconcat = matmul(datt, transpose(*w.wo));

  Mat<T> dq(tr.q.rows, d), dk(tr.k.rows, d), dv(tr.v.rows, d);
  for (std::size_t h = 0; h < heads; ++h) {
    Mat<T> dctx = take_head(dconcat, h, dh);
    const Mat<T>& p = tr.probs[h];
    Mat<T> qh = take_head(tr.q, h, dh);
    Mat<T> kh = take_head(tr.k, h, dh);
    Mat<T> vh = take_head(tr.v, h, dh);

    Mat<T> dp = matmul(dctx, transpose(vh));
    Mat<T> dvh = matmul(transpose(p), dctx);
    Mat<T> ds = softmax_backward(p, dp);
    scale_inplace(ds, inv_sqrt);
    Mat<T> dqh = matmul(ds, kh);
    Mat<T> dkh = matmul(transpose(ds), qh);

    put_head(dq, dqh, h, dh);
    put_head(dk, dkh, h, dh);
    put_head(dv, dvh, h, dh);
  }
  add_grad(g, prefix + ".attn.q", matmul(transpose(nq), dq));
  add_grad(g, prefix + ".attn.k", matmul(transpose(nkv), dk));
  add_grad(g, prefix + ".attn.v", matmul(transpose(nkv), dv));
  acc_add(dnq, matmul(dq, transpose(*w.wq)));
  acc_add(dnkv, matmul(dk, transpose(*w.wk)));
  acc_add(dnkv, matmul(dv, transpose(*w.wv)));
}

// ---------------------------------------------------------------------------
// Transformer blocks (pre-norm): x += attn(LN(x)); x += mlp(LN(x))

template <typename T>
struct BlockTrace {
  Mat<T> x_in;
  Mat<T> n1;
  std::vector<T> inv1;
  AttnTrace<T> attn;
  Mat<T> x_mid;
  Mat<T> n2;
  std::vector<T> inv2;
  Mat<T> h1, hg;
};

template <typename T>
struct EncTrace {
  Mat<T> x0;
  std::vector<BlockTrace<T>> blocks;
  Mat<T> xf;
  Mat<T> z;
  std::vector<T> invz;
};

template <typename T>
struct ActTrace {
  Mat<T> ctx;
  Mat<T> nc;
  std::vector<T> invc;
  std::vector<BlockTrace<T>> blocks;
  Mat<T> xf;
  Mat<T> yf;
  std::vector<T> invy;
  Mat<T> pred;
};

template <typename T>
struct Trace {
  EncTrace<T> enc;
  ActTrace<T> act;
};

// One block forward. For encoder blocks the attention context is the stream
// itself (nkv == n1); for action blocks it is the fixed normalized context.
template <typename T>
Mat<T> block_fwd(std::size_t heads, const Mat<T>& x,
                 const Mat<T>* cross_ctx,  // nullptr => self-attention
                 const typename WeightsRef<T>::Block& w, BlockTrace<T>* tr,
                 std::uint64_t* macs) {
  auto mm = [&](const Mat<T>& a, const Mat<T>& b) {
    if (macs) *macs += a.rows * a.cols * b.cols;
    return matmul(a, b);
  };
  std::vector<T> inv1, inv2;
  Mat<T> n1 = ln_rows(x, inv1);
  const Mat<T>& nkv = cross_ctx ? *cross_ctx : n1;
  AttnTrace<T> atr;
  Mat<T> att = attention_fwd(heads, n1, nkv, w, tr ? &atr : nullptr, macs);
  Mat<T> x_mid = x;
  acc_add(x_mid, att);

  Mat<T> n2 = ln_rows(x_mid, inv2);
  Mat<T> h1 = mm(n2, *w.fc1);
  Mat<T> hg(h1.rows, h1.cols);
  for (std::size_t i = 0; i < h1.size(); ++i) hg.data[i] = gelu(h1.data[i]);
  Mat<T> m = mm(hg, *w.fc2);
  Mat<T> x_out = x_mid;
  acc_add(x_out, m);

  if (tr) {
    tr->x_in = x;
    tr->n1 = std::move(n1);
    tr->inv1 = std::move(inv1);
    tr->attn = std::move(atr);
    tr->x_mid = std::move(x_mid);
    tr->n2 = std::move(n2);
    tr->inv2 = std::move(inv2);
    tr->h1 = std::move(h1);
    tr->hg = std::move(hg);
  }
  return x_out;
}

// Backward through one block. dx_out is consumed; returns dx_in. When the
// block cross-attends, context grads accumulate into *dctx.
template <typename T>
Mat<T> block_bwd(std::size_t heads, const typename WeightsRef<T>::Block& w,
                 const BlockTrace<T>& tr, const Mat<T>* cross_ctx, Mat<T>* dctx,
                 const Mat<T>& dx_out, const std::string& prefix, GradMap<T>& g) {
  // mlp half: x_out = x_mid + mlp(LN(x_mid))
  Mat<T> dh1(tr.h1.rows, tr.h1.cols);
  {
    add_grad(g, prefix + ".mlp.fc2", matmul(transpose(tr.hg), dx_out));
    Mat<T> dhg = matmul(dx_out, transpose(*w.fc2));
    for (std::size_t i = 0; i < dh1.size(); ++i) {
      dh1.data[i] = dhg.data[i] * gelu_prime(tr.h1.data[i]);
    }
    add_grad(g, prefix + ".mlp.fc1", matmul(transpose(tr.n2), dh1));
  }
  Mat<T> dx_mid = dx_out;
  {
    Mat<T> dn2 = matmul(dh1, transpose(*w.fc1));
    acc_add(dx_mid, ln_backward(dn2, tr.n2, tr.inv2));
  }

  // attention half: x_mid = x_in + attn(LN(x_in), ctx)
  Mat<T> dx_in = dx_mid;
  {
    Mat<T> dn1(tr.n1.rows, tr.n1.cols);
    const Mat<T>& nkv = cross_ctx ? *cross_ctx : tr.n1;
    Mat<T>& dnkv = cross_ctx ? *dctx : dn1;
    attention_bwd(heads, tr.n1, nkv, w, tr.attn, dx_mid, prefix, g, dn1, dnkv);
    acc_add(dx_in, ln_backward(dn1, tr.n1, tr.inv1));
  }
  return dx_in;
}

// ---------------------------------------------------------------------------
// Full network

template <typename T>
Mat<T> embed_fwd(const BackboneConfig& cfg, const WeightsRef<T>& w,
                 std::span<const std::uint32_t> tokens, std::span<const T> obs,
                 std::uint64_t* macs) {
  const std::size_t d = cfg.model_dim;
  const std::size_t m = cfg.max_instr_len;
  Mat<T> x0(cfg.seq_len(), d);
  for (std::size_t i = 0; i < m; ++i) {
    const T* te = w.tok_embed->row(tokens[i]);
    const T* pe = w.pos_embed->row(i);
    T* xr = x0.row(i);
    for (std::size_t j = 0; j < d; ++j) xr[j] = te[j] + pe[j];
  }
  // observation token: obs * W_obs + pos[m]
  if (macs) *macs += cfg.obs_dim * d;
  T* xr = x0.row(m);
  const T* pe = w.pos_embed->row(m);
  for (std::size_t j = 0; j < d; ++j) {
    T acc{};
    for (std::size_t i = 0; i < cfg.obs_dim; ++i) acc += obs[i] * (*w.obs_proj)(i, j);
    xr[j] = acc + pe[j];
  }
  return x0;
}

template <typename T>
Mat<T> encode_net(const BackboneConfig& cfg, const WeightsRef<T>& w,
                  std::span<const std::uint32_t> tokens, std::span<const T> obs,
                  EncTrace<T>* tr, std::uint64_t* macs) {
  Mat<T> x = embed_fwd(cfg, w, tokens, obs, macs);
  if (tr) tr->x0 = x;
  if (tr) tr->blocks.resize(cfg.enc_layers);
  for (std::size_t i = 0; i < cfg.enc_layers; ++i) {
    x = block_fwd(cfg.heads, x, nullptr, w.enc[i], tr ? &tr->blocks[i] : nullptr, macs);
  }
  if (tr) tr->xf = x;
  std::vector<T> invz;
  Mat<T> z = ln_rows(x, invz);
  if (tr) {
    tr->z = z;
    tr->invz = std::move(invz);
  }
  return z;
}

template <typename T>
Mat<T> act_net(const BackboneConfig& cfg, const WeightsRef<T>& w, const Mat<T>& z,
               std::span<const T> proprio, ActTrace<T>* tr, std::uint64_t* macs) {
  const std::size_t d = cfg.model_dim;
  auto mm = [&](const Mat<T>& a, const Mat<T>& b) {
    if (macs) *macs += a.rows * a.cols * b.cols;
    return matmul(a, b);
  };
  // context = encoder output plus one projected proprio token
  Mat<T> ctx(z.rows + 1, d);
  for (std::size_t i = 0; i < z.rows; ++i) {
    const T* src = z.row(i);
    T* dst = ctx.row(i);
    for (std::size_t j = 0; j < d; ++j) dst[j] = src[j];
  }
  if (macs) *macs += cfg.proprio_dim * d;
  T* pr = ctx.row(z.rows);
  for (std::size_t j = 0; j < d; ++j) {
    T acc{};
    for (std::size_t i = 0; i < cfg.proprio_dim; ++i) {
      acc += proprio[i] * (*w.proprio_proj)(i, j);
    }
    pr[j] = acc;
  }
  std::vector<T> invc;
  Mat<T> nc = ln_rows(ctx, invc);

  Mat<T> q = *w.queries;
  if (tr) tr->blocks.resize(cfg.act_layers);
  for (std::size_t i = 0; i < cfg.act_layers; ++i) {
    q = block_fwd(cfg.heads, q, &nc, w.act[i], tr ? &tr->blocks[i] : nullptr, macs);
  }
  std::vector<T> invy;
  Mat<T> yf = ln_rows(q, invy);
  Mat<T> pred = mm(yf, *w.out_proj);
  if (tr) {
    tr->ctx = std::move(ctx);
    tr->nc = std::move(nc);
    tr->invc = std::move(invc);
    tr->xf = std::move(q);
    tr->yf = std::move(yf);
    tr->invy = std::move(invy);
    tr->pred = pred;
  }
  return pred;
}

template <typename T>
Mat<T> forward_net(const BackboneConfig& cfg, const WeightsRef<T>& w,
                   std::span<const std::uint32_t> tokens, std::span<const T> obs,
                   std::span<const T> proprio, Trace<T>* tr, std::uint64_t* macs) {
  Mat<T> z = encode_net(cfg, w, tokens, obs, tr ? &tr->enc : nullptr, macs);
  return act_net(cfg, w, z, proprio, tr ? &tr->act : nullptr, macs);
}

// Reverse-mode gradients of every weight in the table w.r.t. dpred,
// accumulated into g (callers sum over a batch and rescale afterwards).
template <typename T>
void backward_net(const BackboneConfig& cfg, const WeightsRef<T>& w,
                  std::span<const std::uint32_t> tokens, std::span<const T> obs,
                  std::span<const T> proprio, const Trace<T>& tr, const Mat<T>& dpred,
                  GradMap<T>& g) {
  const std::size_t d = cfg.model_dim;

  // output projection and final LN of the action stream
  add_grad(g, "act.out", matmul(transpose(tr.act.yf), dpred));
  Mat<T> dq = ln_backward(matmul(dpred, transpose(*w.out_proj)), tr.act.yf, tr.act.invy);

  // action blocks (context grads accumulate across blocks)
  Mat<T> dnc(tr.act.nc.rows, d);
  for (std::size_t i = cfg.act_layers; i-- > 0;) {
    dq = block_bwd(cfg.heads, w.act[i], tr.act.blocks[i], &tr.act.nc, &dnc, dq,
                   "act." + std::to_string(i), g);
  }
  add_grad(g, "act.queries", dq);

  // context LN, then split into encoder output and proprio token
  Mat<T> dctx = ln_backward(dnc, tr.act.nc, tr.act.invc);
  Mat<T> dz(tr.enc.z.rows, d);
  for (std::size_t i = 0; i < dz.rows; ++i) {
    const T* src = dctx.row(i);
    T* dst = dz.row(i);
    for (std::size_t j = 0; j < d; ++j) dst[j] = src[j];
  }
  {
    Mat<T> dwp(cfg.proprio_dim, d);
    const T* dp = dctx.row(dz.rows);
    for (std::size_t i = 0; i < cfg.proprio_dim; ++i) {
      for (std::size_t j = 0; j < d; ++j) dwp(i, j) = proprio[i] * dp[j];
    }
    add_grad(g, "act.embed.proprio", std::move(dwp));
  }

  // encoder final LN and blocks
  Mat<T> dx = ln_backward(dz, tr.enc.z, tr.enc.invz);
  for (std::size_t i = cfg.enc_layers; i-- > 0;) {
    dx = block_bwd(cfg.heads, w.enc[i], tr.enc.blocks[i], nullptr, nullptr, dx,
                   "enc." + std::to_string(i), g);
  }

  // embeddings
  {
    Mat<T> dtok(cfg.vocab_size, d);
    Mat<T> dpos(cfg.seq_len(), d);
    for (std::size_t i = 0; i < cfg.max_instr_len; ++i) {
      const T* src = dx.row(i);
      T* trow = dtok.row(tokens[i]);
      T* prow = dpos.row(i);
      for (std::size_t j = 0; j < d; ++j) {
        trow[j] += src[j];
        prow[j] += src[j];
      }
    }
    const std::size_t m = cfg.max_instr_len;
    Mat<T> dobs(cfg.obs_dim, d);
    const T* src = dx.row(m);
    T* prow = dpos.row(m);
    for (std::size_t j = 0; j < d; ++j) prow[j] += src[j];
    for (std::size_t i = 0; i < cfg.obs_dim; ++i) {
      for (std::size_t j = 0; j < d; ++j) dobs(i, j) = obs[i] * src[j];
    }
    add_grad(g, "enc.embed.tok", std::move(dtok));
    add_grad(g, "enc.embed.pos", std::move(dpos));
    add_grad(g, "enc.embed.obs", std::move(dobs));
  }
}

template <typename T>
std::vector<T> to_vec(std::span<const float> v) {
  return std::vector<T>(v.begin(), v.end());
}

}  // namespace coral::detail
