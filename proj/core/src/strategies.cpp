// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "hotswitch/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <limits>
#include <stdexcept>
#include <string>

#include "attention.hpp"

namespace hotswitch {

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::MegatronTS: return "MegatronTS";
    case Strategy::MegatronCZ: return "MegatronCZ";
    case Strategy::UlyssesZ: return "UlyssesZ";
    case Strategy::ColossalZ: return "ColossalZ";
    case Strategy::METP: return "METP";
  }
  return "?";
}

std::optional<Strategy> parse_strategy(std::string_view name) {
  for (Strategy s : kAllStrategies) {
    if (strategy_name(s) == name) return s;
  }
  return std::nullopt;
}

bool eval_excluded(Strategy s) { return s == Strategy::ColossalZ; }

std::vector<Strategy> evaluation_strategies() {
  std::vector<Strategy> out;
  for (Strategy s : kAllStrategies) {
    if (!eval_excluded(s)) out.push_back(s);
  }
  return out;
}

std::string_view op_name(OpKind op) { return op == OpKind::MHA ? "MHA" : "FFN"; }

// --------------------------------------------------------------- weights

DenseWeights DenseWeights::random(const ModelConfig& config, std::mt19937_64& rng) {
  config.validate();
  const auto h = config.h;
  const double scale = 1.0 / std::sqrt(static_cast<double>(h));
  DenseWeights w;
  w.w_qkv = random_tensor({h, 3 * h}, rng, scale);
  w.w_proj = random_tensor({h, h}, rng, scale);
  w.w_in = random_tensor({h, 4 * h}, rng, scale);
  w.w_out = random_tensor({4 * h, h}, rng, 0.5 * scale);
  return w;
}

LayerWeights LayerWeights::from_dense(const DenseWeights& dense, const ModelConfig& config,
                                      const DeviceGrid& grid) {
  const int p = grid.size();
  LayerWeights w;
  w.w_qkv = shard(dense.w_qkv, spec_layout(Role::WQkv, config, 1, p), grid);
  w.w_proj = shard(dense.w_proj, spec_layout(Role::WProj, config, 1, p), grid);
  w.w_in = shard(dense.w_in, spec_layout(Role::WIn, config, 1, p), grid);
  w.w_out = shard(dense.w_out, spec_layout(Role::WOut, config, 1, p), grid);
  return w;
}

DenseWeights LayerWeights::to_dense(const ModelConfig& config) const {
  const int p = static_cast<int>(w_qkv.size());
  DenseWeights d;
  d.w_qkv = unshard(w_qkv, spec_layout(Role::WQkv, config, 1, p));
  d.w_proj = unshard(w_proj, spec_layout(Role::WProj, config, 1, p));
  d.w_in = unshard(w_in, spec_layout(Role::WIn, config, 1, p));
  d.w_out = unshard(w_out, spec_layout(Role::WOut, config, 1, p));
  return d;
}

std::int64_t LayerWeights::elements_per_device() const {
  if (w_qkv.empty()) return 0;
  return w_qkv.front().numel() + w_proj.front().numel() + w_in.front().numel() +
         w_out.front().numel();
}

// ------------------------------------------------------------- reference

SimTensor reference_mha(const SimTensor& x, const DenseWeights& weights, std::int64_t heads) {
  if (x.rank() != 3) throw std::invalid_argument("reference_mha expects b x s x h input");
  const auto B = x.shape[0];
  const auto s = x.shape[1];
  const auto h = x.shape[2];
  if (heads <= 0 || h % heads != 0) {
    throw std::invalid_argument("head count " + std::to_string(heads) + " does not divide h=" +
                                std::to_string(h));
  }
  if (weights.w_qkv.shape != Shape{h, 3 * h} || weights.w_proj.shape != Shape{h, h}) {
    throw std::invalid_argument("reference_mha weight shapes do not match h=" +
                                std::to_string(h));
  }
  const auto d = h / heads;
  const SimTensor qkv = matmul(x, weights.w_qkv);
  SimTensor attn({B, s, h});
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  std::vector<double> weight(static_cast<std::size_t>(s));
  auto at = [&](std::int64_t b, std::int64_t t, std::int64_t col) {
    return qkv.data[static_cast<std::size_t>((b * s + t) * 3 * h + col)];
  };
  for (std::int64_t b = 0; b < B; ++b) {
    for (std::int64_t i = 0; i < s; ++i) {
      for (std::int64_t j = 0; j < heads; ++j) {
        const auto q0 = 3 * d * j;
        const auto k0 = q0 + d;
        const auto v0 = q0 + 2 * d;
        double row_max = -std::numeric_limits<double>::infinity();
        for (std::int64_t t = 0; t < s; ++t) {
          double dot = 0.0;
          for (std::int64_t c = 0; c < d; ++c) dot += at(b, i, q0 + c) * at(b, t, k0 + c);
          weight[static_cast<std::size_t>(t)] = dot * scale;
          row_max = std::max(row_max, weight[static_cast<std::size_t>(t)]);
        }
        double* out = attn.data.data() + (b * s + i) * h + j * d;
        double norm = 0.0;
        for (std::int64_t t = 0; t < s; ++t) {
          const double e = std::exp(weight[static_cast<std::size_t>(t)] - row_max);
          norm += e;
          for (std::int64_t c = 0; c < d; ++c) out[c] += e * at(b, t, v0 + c);
        }
        for (std::int64_t c = 0; c < d; ++c) out[c] /= norm;
      }
    }
  }
  return matmul(attn, weights.w_proj);
}

SimTensor reference_ffn(const SimTensor& x, const DenseWeights& weights) {
  if (x.rank() != 3) throw std::invalid_argument("reference_ffn expects b x s x h input");
  const auto h = x.shape[2];
  if (weights.w_in.shape != Shape{h, 4 * h} || weights.w_out.shape != Shape{4 * h, h}) {
    throw std::invalid_argument("reference_ffn weight shapes do not match h=" +
                                std::to_string(h));
  }
  SimTensor hidden = matmul(x, weights.w_in);
  gelu_inplace(hidden);
  return matmul(hidden, weights.w_out);
}

// ------------------------------------------------------------- executors

void check_preconditions(Strategy s, const ModelConfig& config, std::int64_t seq_len, int p) {
  config.validate();
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  if (seq_len < 1 || seq_len % p != 0) {
    throw std::invalid_argument(std::string(strategy_name(s)) + ": sequence length " +
                                std::to_string(seq_len) + " not divisible by p=" +
                                std::to_string(p));
  }
  if (config.h % p != 0) {
    throw std::invalid_argument(std::string(strategy_name(s)) + ": hidden size " +
                                std::to_string(config.h) + " not divisible by p=" +
                                std::to_string(p));
  }
  const bool head_parallel =
      s == Strategy::MegatronTS || s == Strategy::UlyssesZ || s == Strategy::METP;
  if (head_parallel && config.n % p != 0) {
    throw std::invalid_argument(std::string(strategy_name(s)) + ": head count " +
                                std::to_string(config.n) + " not divisible by p=" +
                                std::to_string(p));
  }
}

namespace {

using detail::HeadView;
using detail::OnlineSoftmax;

struct Dims {
  int p;
  std::int64_t B, s, S, h, H, n, nl, d;
};

Dims prepare(Strategy strategy, const DeviceGrid& grid, std::span<const SimTensor> x,
             const LayerWeights& w, const ModelConfig& cfg, Role input_role) {
  const int p = grid.size();
  if (static_cast<int>(x.size()) != p || x.front().rank() != 3) {
    throw std::invalid_argument(std::string(strategy_name(strategy)) +
                                ": expected one b x s/p x h shard per device");
  }
  const auto seq_len = x.front().shape[1] * p;
  check_preconditions(strategy, cfg, seq_len, p);
  check_conformance(x, spec_layout(input_role, cfg, seq_len, p));
  check_conformance(w.w_qkv, spec_layout(Role::WQkv, cfg, seq_len, p));
  check_conformance(w.w_proj, spec_layout(Role::WProj, cfg, seq_len, p));
  check_conformance(w.w_in, spec_layout(Role::WIn, cfg, seq_len, p));
  check_conformance(w.w_out, spec_layout(Role::WOut, cfg, seq_len, p));
  return Dims{p,         cfg.b,          seq_len,   seq_len / p,  cfg.h,
              cfg.h / p, cfg.n,          cfg.n / p, cfg.head_dim()};
}

using Leases = std::vector<MemoryLease>;

Leases lease_each(DeviceGrid& grid, std::int64_t elements, MemKind kind = MemKind::Activation) {
  Leases out;
  out.reserve(static_cast<std::size_t>(grid.size()));
  for (int d = 0; d < grid.size(); ++d) out.push_back(grid.lease(d, elements, kind));
  return out;
}

void release(Leases& leases) {
  for (auto& l : leases) l.release();
  leases.clear();
}

// x[..., k] projected on the selected q/k/v parts of a head-major block
// w_t [3 * heads * d, k]. Output columns are part-major: part slot pi, head
// j, channel c at pi * heads * d + j * d + c.
SimTensor project_parts(const SimTensor& x, const SimTensor& w_t, std::int64_t heads,
                        std::int64_t d, std::initializer_list<int> parts) {
  const auto k = x.shape.back();
  if (w_t.rank() != 2 || w_t.shape[0] != 3 * heads * d || w_t.shape[1] != k) {
    throw std::invalid_argument("qkv projection block " + shape_str(w_t.shape) +
                                " does not match input " + shape_str(x.shape));
  }
  const auto rows = x.numel() / k;
  const auto width = static_cast<std::int64_t>(parts.size()) * heads * d;
  Shape out_shape = x.shape;
  out_shape.back() = width;
  SimTensor out(out_shape, x.device);
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* xr = x.data.data() + r * k;
    std::int64_t slot = 0;
    for (int part : parts) {
      for (std::int64_t j = 0; j < heads; ++j) {
        for (std::int64_t c = 0; c < d; ++c) {
          const double* wr = w_t.data.data() + ((3 * j + part) * d + c) * k;
          double sum = 0.0;
          for (std::int64_t kk = 0; kk < k; ++kk) sum += xr[kk] * wr[kk];
          out.data[static_cast<std::size_t>(r * width + slot * heads * d + j * d + c)] = sum;
        }
      }
      ++slot;
    }
  }
  return out;
}

HeadView part_view(const SimTensor& t, int slot, std::int64_t heads, std::int64_t d) {
  return HeadView{&t, slot * heads * d, d};
}

// Sends one device's tensor to every other device by forwarding it p - 1
// hops around the ring. Receivers are charged a parameter lease.
Shards ring_forward(DeviceGrid& grid, const SimTensor& block, int owner, Leases& leases) {
  const int p = grid.size();
  Shards copies(static_cast<std::size_t>(p));
  Shards carry(static_cast<std::size_t>(p), SimTensor(Shape{0}));
  carry[static_cast<std::size_t>(owner)] = block;
  copies[static_cast<std::size_t>(owner)] = block;
  for (int hop = 1; hop < p; ++hop) {
    carry = ring_pass(grid, carry, 1);
    const int dev = (owner + hop) % p;
    copies[static_cast<std::size_t>(dev)] = carry[static_cast<std::size_t>(dev)];
    leases.push_back(grid.lease(dev, block.numel(), MemKind::Parameter));
  }
  return copies;
}

// ---- MegatronTS: AllGather on s, head-parallel compute, ReduceScatter on s.

Shards megatron_ts_mha(DeviceGrid& grid, std::span<const SimTensor> x, const LayerWeights& w,
                       const ModelConfig& cfg) {
  const auto m = prepare(Strategy::MegatronTS, grid, x, w, cfg, Role::XMha);
  Shards full = all_gather(grid, x, 1);
  Leases full_mem = lease_each(grid, m.B * m.s * m.h);

  Shards qkv;
  Leases qkv_mem = lease_each(grid, 3 * m.B * m.s * m.H);
  for (int d = 0; d < m.p; ++d) {
    qkv.push_back(project_parts(full[d], w.w_qkv[d], m.nl, m.d, {0, 1, 2}));
  }
  full.clear();
  release(full_mem);

  Shards attn;
  Leases attn_mem = lease_each(grid, m.B * m.s * m.H);
  for (int d = 0; d < m.p; ++d) {
    OnlineSoftmax sm(m.B, m.s, m.nl, m.d, d);
    sm.absorb(part_view(qkv[d], 0, m.nl, m.d), part_view(qkv[d], 1, m.nl, m.d),
              part_view(qkv[d], 2, m.nl, m.d), grid, d);
    attn.push_back(std::move(sm).finish());
  }
  qkv.clear();
  release(qkv_mem);

  Shards partial;
  Leases partial_mem = lease_each(grid, m.B * m.s * m.h);
  for (int d = 0; d < m.p; ++d) partial.push_back(matmul(attn[d], w.w_proj[d]));
  attn.clear();
  release(attn_mem);

  Shards out = reduce_scatter(grid, partial, 1);
  Leases out_mem = lease_each(grid, m.B * m.S * m.h);
  release(partial_mem);
  return out;
}

Shards megatron_ts_ffn(DeviceGrid& grid, std::span<const SimTensor> x, const LayerWeights& w,
                       const ModelConfig& cfg) {
  const auto m = prepare(Strategy::MegatronTS, grid, x, w, cfg, Role::XFfn);
  Shards full = all_gather(grid, x, 1);
  Leases full_mem = lease_each(grid, m.B * m.s * m.h);

  Shards hidden;
  Leases hidden_mem = lease_each(grid, 4 * m.B * m.s * m.H);
  for (int d = 0; d < m.p; ++d) {
    hidden.push_back(matmul_nt(full[d], w.w_in[d]));
    gelu_inplace(hidden.back());
  }
  full.clear();
  release(full_mem);

  Shards partial;
  Leases partial_mem = lease_each(grid, m.B * m.s * m.h);
  for (int d = 0; d < m.p; ++d) partial.push_back(matmul(hidden[d], w.w_out[d]));
  hidden.clear();
  release(hidden_mem);

  Shards out = reduce_scatter(grid, partial, 1);
  Leases out_mem = lease_each(grid, m.B * m.S * m.h);
  release(partial_mem);
  return out;
}

// ---- ZeRO3 FFN shared by MegatronCZ, UlyssesZ and ColossalZ: gather the
// row-sharded weights transiently, compute on the local s-shard.

Shards zero3_ffn(Strategy strategy, DeviceGrid& grid, std::span<const SimTensor> x,
                 const LayerWeights& w, const ModelConfig& cfg) {
  const auto m = prepare(strategy, grid, x, w, cfg, Role::XFfn);
  Shards w_in = all_gather(grid, w.w_in, 0);  // 4h x h == W_in^T
  Leases w_in_mem = lease_each(grid, 4 * m.h * m.h, MemKind::Parameter);

  Shards hidden;
  Leases hidden_mem = lease_each(grid, 4 * m.B * m.S * m.h);
  for (int d = 0; d < m.p; ++d) {
    hidden.push_back(matmul_nt(x[d], w_in[d]));
    gelu_inplace(hidden.back());
  }
  w_in.clear();
  release(w_in_mem);

  Shards w_out = all_gather(grid, w.w_out, 0);  // 4h x h
  Leases w_out_mem = lease_each(grid, 4 * m.h * m.h, MemKind::Parameter);
  Shards out;
  Leases out_mem = lease_each(grid, m.B * m.S * m.h);
  for (int d = 0; d < m.p; ++d) out.push_back(matmul(hidden[d], w_out[d]));
  return out;
}

Shards megatron_cz_ffn(DeviceGrid& g, std::span<const SimTensor> x, const LayerWeights& w,
                       const ModelConfig& c) {
  return zero3_ffn(Strategy::MegatronCZ, g, x, w, c);
}
Shards ulysses_z_ffn(DeviceGrid& g, std::span<const SimTensor> x, const LayerWeights& w,
                     const ModelConfig& c) {
  return zero3_ffn(Strategy::UlyssesZ, g, x, w, c);
}
Shards colossal_z_ffn(DeviceGrid& g, std::span<const SimTensor> x, const LayerWeights& w,
                      const ModelConfig& c) {
  return zero3_ffn(Strategy::ColossalZ, g, x, w, c);
}

// Output projection with a transiently gathered W_proj.
Shards zero3_projection(DeviceGrid& grid, const Dims& m, const Shards& attn,
                        const LayerWeights& w) {
  Shards w_proj = all_gather(grid, w.w_proj, 0);  // h x h
  Leases w_proj_mem = lease_each(grid, m.h * m.h, MemKind::Parameter);
  Shards out;
  Leases out_mem = lease_each(grid, m.B * m.S * m.h);
  for (int d = 0; d < m.p; ++d) out.push_back(matmul(attn[d], w_proj[d]));
  return out;
}

// ---- MegatronCZ: context-parallel ring attention over s-shards.

Shards megatron_cz_mha(DeviceGrid& grid, std::span<const SimTensor> x, const LayerWeights& w,
                       const ModelConfig& cfg) {
  const auto m = prepare(Strategy::MegatronCZ, grid, x, w, cfg, Role::XMha);
  Shards w_qkv = all_gather(grid, w.w_qkv, 0);  // 3h x h == W_qkv^T
  Leases w_qkv_mem = lease_each(grid, 3 * m.h * m.h, MemKind::Parameter);

  Shards q, kv;
  Leases q_mem = lease_each(grid, m.B * m.S * m.h);
  Leases kv_mem = lease_each(grid, 2 * m.B * m.S * m.h);
  for (int d = 0; d < m.p; ++d) {
    q.push_back(project_parts(x[d], w_qkv[d], m.n, m.d, {0}));
    kv.push_back(project_parts(x[d], w_qkv[d], m.n, m.d, {1, 2}));
  }
  w_qkv.clear();
  release(w_qkv_mem);

  Leases attn_mem = lease_each(grid, m.B * m.S * m.h);
  std::vector<OnlineSoftmax> sm;
  for (int d = 0; d < m.p; ++d) sm.emplace_back(m.B, m.S, m.n, m.d, d);
  auto absorb_all = [&] {
    for (int d = 0; d < m.p; ++d) {
      sm[d].absorb(part_view(q[d], 0, m.n, m.d), part_view(kv[d], 0, m.n, m.d),
                   part_view(kv[d], 1, m.n, m.d), grid, d);
    }
  };
  absorb_all();
  for (int step = 1; step < m.p; ++step) {
    Shards next = ring_pass(grid, kv, 1);
    Leases next_mem = lease_each(grid, 2 * m.B * m.S * m.h);
    release(kv_mem);
    kv = std::move(next);
    kv_mem = std::move(next_mem);
    absorb_all();
  }
  Shards attn;
  for (auto& s : sm) attn.push_back(std::move(s).finish());
  q.clear();
  kv.clear();
  release(q_mem);
  release(kv_mem);

  return zero3_projection(grid, m, attn, w);
}

// ---- UlyssesZ: All-to-All from s-shards to head-shards and back.

Shards ulysses_z_mha(DeviceGrid& grid, std::span<const SimTensor> x, const LayerWeights& w,
                     const ModelConfig& cfg) {
  const auto m = prepare(Strategy::UlyssesZ, grid, x, w, cfg, Role::XMha);
  Shards w_qkv = all_gather(grid, w.w_qkv, 0);
  Leases w_qkv_mem = lease_each(grid, 3 * m.h * m.h, MemKind::Parameter);

  // At p = 1 the exchange is the identity and reuses the local buffer.
  const bool moves = m.p > 1;
  std::array<Shards, 3> heads;
  std::array<Leases, 3> heads_mem;
  for (int part = 0; part < 3; ++part) {
    Shards local;
    Leases local_mem = lease_each(grid, m.B * m.S * m.h);
    for (int d = 0; d < m.p; ++d) {
      local.push_back(project_parts(x[d], w_qkv[d], m.n, m.d, {part}));
    }
    heads[part] = all_to_all(grid, local, 2, 1);  // b x s x h/p
    if (moves) {
      heads_mem[part] = lease_each(grid, m.B * m.s * m.H);
      release(local_mem);
    } else {
      heads_mem[part] = std::move(local_mem);
    }
  }
  w_qkv.clear();
  release(w_qkv_mem);

  Shards attn;
  Leases attn_mem = lease_each(grid, m.B * m.s * m.H);
  for (int d = 0; d < m.p; ++d) {
    OnlineSoftmax sm(m.B, m.s, m.nl, m.d, d);
    sm.absorb(part_view(heads[0][d], 0, m.nl, m.d), part_view(heads[1][d], 0, m.nl, m.d),
              part_view(heads[2][d], 0, m.nl, m.d), grid, d);
    attn.push_back(std::move(sm).finish());
  }
  for (int part = 0; part < 3; ++part) {
    heads[part].clear();
    release(heads_mem[part]);
  }

  Shards local_attn = all_to_all(grid, attn, 1, 2);  // b x s/p x h
  Leases local_attn_mem;
  if (moves) {
    local_attn_mem = lease_each(grid, m.B * m.S * m.h);
    release(attn_mem);
  } else {
    local_attn_mem = std::move(attn_mem);
  }
  attn.clear();
  return zero3_projection(grid, m, local_attn, w);
}

// ---- ColossalZ: ring self-attention materializing S x s scores per head.

Shards colossal_z_mha(DeviceGrid& grid, std::span<const SimTensor> x, const LayerWeights& w,
                      const ModelConfig& cfg) {
  const auto m = prepare(Strategy::ColossalZ, grid, x, w, cfg, Role::XMha);
  Shards w_qkv = all_gather(grid, w.w_qkv, 0);
  Leases w_qkv_mem = lease_each(grid, 3 * m.h * m.h, MemKind::Parameter);

  Shards q, k, v;
  Leases q_mem = lease_each(grid, m.B * m.S * m.h);
  Leases k_mem = lease_each(grid, m.B * m.S * m.h);
  Leases v_mem = lease_each(grid, m.B * m.S * m.h);
  for (int d = 0; d < m.p; ++d) {
    q.push_back(project_parts(x[d], w_qkv[d], m.n, m.d, {0}));
    k.push_back(project_parts(x[d], w_qkv[d], m.n, m.d, {1}));
    v.push_back(project_parts(x[d], w_qkv[d], m.n, m.d, {2}));
  }
  w_qkv.clear();
  release(w_qkv_mem);

  // scores[d] is b x n x S x s; column block `src` holds keys of shard src.
  Shards scores;
  Leases scores_mem = lease_each(grid, m.B * m.n * m.S * m.s);
  for (int d = 0; d < m.p; ++d) scores.emplace_back(Shape{m.B, m.n, m.S, m.s}, d);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m.d));
  auto fill = [&](int step) {
    for (int d = 0; d < m.p; ++d) {
      const int src = ((d - step) % m.p + m.p) % m.p;
      const HeadView qv = part_view(q[d], 0, m.n, m.d);
      const HeadView kv = part_view(k[d], 0, m.n, m.d);
      for (std::int64_t b = 0; b < m.B; ++b) {
        for (std::int64_t j = 0; j < m.n; ++j) {
          for (std::int64_t i = 0; i < m.S; ++i) {
            const double* qi = qv.row(b, i, j);
            double* row = scores[d].data.data() + ((b * m.n + j) * m.S + i) * m.s + src * m.S;
            for (std::int64_t t = 0; t < m.S; ++t) {
              const double* kt = kv.row(b, t, j);
              double dot = 0.0;
              for (std::int64_t c = 0; c < m.d; ++c) dot += qi[c] * kt[c];
              row[t] = dot * scale;
            }
          }
        }
      }
    }
  };
  fill(0);
  for (int step = 1; step < m.p; ++step) {
    Shards next = ring_pass(grid, k, 1);
    Leases next_mem = lease_each(grid, m.B * m.S * m.h);
    release(k_mem);
    k = std::move(next);
    k_mem = std::move(next_mem);
    fill(step);
  }
  q.clear();
  k.clear();
  release(q_mem);
  release(k_mem);

  // Unnormalized softmax in place; normalizers are applied after the V ring.
  std::vector<std::vector<double>> norm(static_cast<std::size_t>(m.p));
  for (int d = 0; d < m.p; ++d) {
    norm[d].assign(static_cast<std::size_t>(m.B * m.n * m.S), 0.0);
    for (std::int64_t r = 0; r < m.B * m.n * m.S; ++r) {
      double* row = scores[d].data.data() + r * m.s;
      double row_max = -std::numeric_limits<double>::infinity();
      for (std::int64_t t = 0; t < m.s; ++t) row_max = std::max(row_max, row[t]);
      double z = 0.0;
      for (std::int64_t t = 0; t < m.s; ++t) {
        row[t] = std::exp(row[t] - row_max);
        z += row[t];
      }
      norm[d][static_cast<std::size_t>(r)] = z;
    }
  }

  Shards attn;
  Leases attn_mem = lease_each(grid, m.B * m.S * m.h);
  for (int d = 0; d < m.p; ++d) attn.emplace_back(Shape{m.B, m.S, m.h}, d);
  auto accumulate = [&](int step) {
    for (int d = 0; d < m.p; ++d) {
      const int src = ((d - step) % m.p + m.p) % m.p;
      const HeadView vv = part_view(v[d], 0, m.n, m.d);
      for (std::int64_t b = 0; b < m.B; ++b) {
        for (std::int64_t j = 0; j < m.n; ++j) {
          for (std::int64_t i = 0; i < m.S; ++i) {
            const double* row =
                scores[d].data.data() + ((b * m.n + j) * m.S + i) * m.s + src * m.S;
            double* out = attn[d].data.data() + (b * m.S + i) * m.h + j * m.d;
            for (std::int64_t t = 0; t < m.S; ++t) {
              const double* vt = vv.row(b, t, j);
              for (std::int64_t c = 0; c < m.d; ++c) out[c] += row[t] * vt[c];
            }
          }
        }
      }
    }
  };
  accumulate(0);
  for (int step = 1; step < m.p; ++step) {
    Shards next = ring_pass(grid, v, 1);
    Leases next_mem = lease_each(grid, m.B * m.S * m.h);
    release(v_mem);
    v = std::move(next);
    v_mem = std::move(next_mem);
    accumulate(step);
  }
  for (int d = 0; d < m.p; ++d) {
    for (std::int64_t b = 0; b < m.B; ++b) {
      for (std::int64_t j = 0; j < m.n; ++j) {
        for (std::int64_t i = 0; i < m.S; ++i) {
          const double z = norm[d][static_cast<std::size_t>((b * m.n + j) * m.S + i)];
          double* out = attn[d].data.data() + (b * m.S + i) * m.h + j * m.d;
          for (std::int64_t c = 0; c < m.d; ++c) out[c] /= z;
        }
      }
    }
  }
  scores.clear();
  v.clear();
  release(scores_mem);
  release(v_mem);

  return zero3_projection(grid, m, attn, w);
}

// ---- METP: two-level loop. Outer loop over head groups in lockstep with
// the group's weight shards forwarded around the ring; inner loop rings the
// group's K/V blocks over s-shards. Only s/p rows are ever resident.

Shards metp_mha(DeviceGrid& grid, std::span<const SimTensor> x, const LayerWeights& w,
                const ModelConfig& cfg) {
  const auto m = prepare(Strategy::METP, grid, x, w, cfg, Role::XMha);
  Shards out;
  Leases out_mem = lease_each(grid, m.B * m.S * m.h);
  for (int d = 0; d < m.p; ++d) out.emplace_back(Shape{m.B, m.S, m.h}, d);

  for (int group = 0; group < m.p; ++group) {
    Leases weight_mem;
    Shards w_qkv = ring_forward(grid, w.w_qkv[group], group, weight_mem);
    Shards w_proj = ring_forward(grid, w.w_proj[group], group, weight_mem);

    Shards q, kv;
    Leases q_mem = lease_each(grid, m.B * m.S * m.H);
    Leases kv_mem = lease_each(grid, 2 * m.B * m.S * m.H);
    for (int d = 0; d < m.p; ++d) {
      q.push_back(project_parts(x[d], w_qkv[d], m.nl, m.d, {0}));
      kv.push_back(project_parts(x[d], w_qkv[d], m.nl, m.d, {1, 2}));
    }

    Leases attn_mem = lease_each(grid, m.B * m.S * m.H);
    std::vector<OnlineSoftmax> sm;
    for (int d = 0; d < m.p; ++d) sm.emplace_back(m.B, m.S, m.nl, m.d, d);
    auto absorb_all = [&] {
      for (int d = 0; d < m.p; ++d) {
        sm[d].absorb(part_view(q[d], 0, m.nl, m.d), part_view(kv[d], 0, m.nl, m.d),
                     part_view(kv[d], 1, m.nl, m.d), grid, d);
      }
    };
    absorb_all();
    for (int step = 1; step < m.p; ++step) {
      Shards next = ring_pass(grid, kv, 1);
      Leases next_mem = lease_each(grid, 2 * m.B * m.S * m.H);
      release(kv_mem);
      kv = std::move(next);
      kv_mem = std::move(next_mem);
      absorb_all();
    }
    Shards attn;
    for (auto& s : sm) attn.push_back(std::move(s).finish());
    q.clear();
    kv.clear();
    release(q_mem);
    release(kv_mem);

    // Rows of W_proj for this head group: O += A_g W_proj[g].
    for (int d = 0; d < m.p; ++d) matmul_accumulate(out[d], attn[d], w_proj[d]);
    attn.clear();
    release(attn_mem);
    release(weight_mem);
  }
  return out;
}

Shards metp_ffn(DeviceGrid& grid, std::span<const SimTensor> x, const LayerWeights& w,
                const ModelConfig& cfg) {
  const auto m = prepare(Strategy::METP, grid, x, w, cfg, Role::XFfn);
  Shards out;
  Leases out_mem = lease_each(grid, m.B * m.S * m.h);
  for (int d = 0; d < m.p; ++d) out.emplace_back(Shape{m.B, m.S, m.h}, d);

  for (int group = 0; group < m.p; ++group) {
    Leases weight_mem;
    Shards w_in = ring_forward(grid, w.w_in[group], group, weight_mem);
    Shards w_out = ring_forward(grid, w.w_out[group], group, weight_mem);
    for (int d = 0; d < m.p; ++d) {
      auto hidden_mem = grid.lease(d, 4 * m.B * m.S * m.H);
      SimTensor hidden = matmul_nt(x[d], w_in[d]);
      gelu_inplace(hidden);
      matmul_accumulate(out[d], hidden, w_out[d]);
    }
    release(weight_mem);
  }
  return out;
}

Executor executor_for(Strategy s, OpKind op) {
  if (op == OpKind::MHA) {
    switch (s) {
      case Strategy::MegatronTS: return &megatron_ts_mha;
      case Strategy::MegatronCZ: return &megatron_cz_mha;
      case Strategy::UlyssesZ: return &ulysses_z_mha;
      case Strategy::ColossalZ: return &colossal_z_mha;
      case Strategy::METP: return &metp_mha;
    }
  } else {
    switch (s) {
      case Strategy::MegatronTS: return &megatron_ts_ffn;
      case Strategy::MegatronCZ: return &megatron_cz_ffn;
      case Strategy::UlyssesZ: return &ulysses_z_ffn;
      case Strategy::ColossalZ: return &colossal_z_ffn;
      case Strategy::METP: return &metp_ffn;
    }
  }
  throw std::invalid_argument("unknown strategy");
}

}  // namespace

Shards mha(Strategy s, DeviceGrid& grid, std::span<const SimTensor> x_shards,
           const LayerWeights& weights, const ModelConfig& config) {
  return executor_for(s, OpKind::MHA)(grid, x_shards, weights, config);
}

Shards ffn(Strategy s, DeviceGrid& grid, std::span<const SimTensor> x_shards,
           const LayerWeights& weights, const ModelConfig& config) {
  return executor_for(s, OpKind::FFN)(grid, x_shards, weights, config);
}

// --------------------------------------------------- closed-form accounting

std::vector<CommStep> comm_schedule(Strategy s, OpKind op, const ModelConfig& cfg,
                                    std::int64_t seq_len, int p, int bytes_per_elem) {
  check_preconditions(s, cfg, seq_len, p);
  const std::int64_t E = bytes_per_elem;
  const auto B = cfg.b, h = cfg.h, S = seq_len / p, H = h / p;
  auto share = [&](std::int64_t elements) { return elements * E * (p - 1) / p; };
  std::vector<CommStep> out;
  auto add = [&](Primitive prim, std::int64_t bytes, int times = 1) {
    for (int i = 0; i < times; ++i) out.push_back({prim, bytes});
  };
  if (s == Strategy::MegatronTS) {
    add(Primitive::AllGather, share(B * seq_len * h));
    add(Primitive::ReduceScatter, share(B * seq_len * h));
    return out;
  }
  if (s == Strategy::METP) {
    const std::int64_t first = op == OpKind::MHA ? 3 * H * h : 4 * H * h;
    const std::int64_t second = op == OpKind::MHA ? H * h : 4 * H * h;
    for (int g = 0; g < p; ++g) {
      for (int hop = 1; hop < p; ++hop) add(Primitive::RingPass, first * E);
      for (int hop = 1; hop < p; ++hop) add(Primitive::RingPass, second * E);
      if (op == OpKind::MHA) add(Primitive::RingPass, 2 * B * S * H * E, p - 1);
    }
    return out;
  }
  if (op == OpKind::FFN) {
    add(Primitive::AllGather, share(4 * h * h), 2);
    return out;
  }
  add(Primitive::AllGather, share(3 * h * h));
  switch (s) {
    case Strategy::MegatronCZ:
      add(Primitive::RingPass, 2 * B * S * h * E, p - 1);
      break;
    case Strategy::UlyssesZ:
      add(Primitive::AllToAll, share(B * S * h), 4);
      break;
    case Strategy::ColossalZ:
      add(Primitive::RingPass, B * S * h * E, 2 * (p - 1));
      break;
    default:
      break;
  }
  add(Primitive::AllGather, share(h * h));
  return out;
}

PeakElements executor_peak(Strategy s, OpKind op, const ModelConfig& cfg, std::int64_t seq_len,
                           int p) {
  check_preconditions(s, cfg, seq_len, p);
  const auto B = cfg.b, h = cfg.h, n = cfg.n, S = seq_len / p, H = h / p, sl = seq_len;
  const bool ring = p > 1;
  auto mx = [](std::initializer_list<std::int64_t> xs) { return std::max(xs); };
  PeakElements pk;
  switch (s) {
    case Strategy::MegatronTS:
      if (op == OpKind::MHA) {
        pk.activation = mx({B * sl * h + 3 * B * sl * H, 4 * B * sl * H + sl,
                            B * sl * H + B * sl * h, B * sl * h + B * S * h});
      } else {
        pk.activation = mx({B * sl * h + 4 * B * sl * H, 4 * B * sl * H + B * sl * h,
                            B * sl * h + B * S * h});
      }
      return pk;
    case Strategy::METP:
      if (op == OpKind::MHA) {
        pk.activation = B * S * h + mx({4 * B * S * H + S, ring ? 6 * B * S * H : 0});
        pk.parameter = ring ? 4 * H * h : 0;
      } else {
        pk.activation = B * S * h + 4 * B * S * H;
        pk.parameter = ring ? 8 * H * h : 0;
      }
      return pk;
    default:
      break;
  }
  if (op == OpKind::FFN) {
    pk.activation = 5 * B * S * h;
    pk.parameter = 4 * h * h;
    return pk;
  }
  pk.parameter = 3 * h * h;
  switch (s) {
    case Strategy::MegatronCZ:
      pk.activation = mx({4 * B * S * h + S, ring ? 6 * B * S * h : 0, 2 * B * S * h});
      break;
    case Strategy::UlyssesZ:
      pk.activation = ring ? mx({3 * B * sl * H + B * S * h, 4 * B * sl * H + sl,
                                 B * sl * H + B * S * h, 2 * B * S * h})
                           : mx({4 * B * sl * h + sl, 2 * B * sl * h});
      break;
    case Strategy::ColossalZ:
      pk.activation = (ring ? 4 : 3) * B * S * h + B * n * S * sl;
      break;
    default:
      break;
  }
  return pk;
}

// -------------------------------------------------------------- registry

const FunctionRegistry& FunctionRegistry::builtin() {
  static const FunctionRegistry registry = [] {
    FunctionRegistry r;
    for (Strategy s : kAllStrategies) {
      r.add(s, OpKind::MHA, executor_for(s, OpKind::MHA));
      r.add(s, OpKind::FFN, executor_for(s, OpKind::FFN));
    }
    return r;
  }();
  return registry;
}

void FunctionRegistry::add(Strategy s, OpKind op, Executor fn) {
  if (fn == nullptr) throw std::invalid_argument("null executor");
  table_[{s, op}] = fn;
}

Executor FunctionRegistry::lookup(Strategy s, OpKind op) const {
  auto it = table_.find({s, op});
  if (it == table_.end()) {
    throw std::out_of_range("no executor registered for " + std::string(strategy_name(s)) +
                            "/" + std::string(op_name(op)));
  }
  return it->second;
}

bool FunctionRegistry::contains(Strategy s, OpKind op) const {
  return table_.count({s, op}) != 0;
}

std::vector<Strategy> FunctionRegistry::strategies() const {
  std::vector<Strategy> out;
  for (const auto& [key, fn] : table_) {
    if (key.second == OpKind::MHA) out.push_back(key.first);
  }
  return out;
}

}  // namespace hotswitch
