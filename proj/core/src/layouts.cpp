// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "hotswitch/layouts.hpp"

#include <json.hpp>
#include <stdexcept>

namespace hotswitch {

void ModelConfig::validate() const {
  if (h <= 0 || n <= 0 || L <= 0 || b <= 0) {
    throw std::invalid_argument("model config needs positive h, n, L, b");
  }
  if (h % n != 0) {
    throw std::invalid_argument("hidden size " + std::to_string(h) +
                                " not divisible by head count " + std::to_string(n));
  }
}

std::string_view role_name(Role role) {
  switch (role) {
    case Role::XMha: return "X_MHA";
    case Role::O: return "O";
    case Role::XFfn: return "X_FFN";
    case Role::Z: return "Z";
    case Role::WQkv: return "W_qkv";
    case Role::WProj: return "W_proj";
    case Role::WIn: return "W_in";
    case Role::WOut: return "W_out";
  }
  return "?";
}

std::string_view method_name(Method method) {
  switch (method) {
    case Method::MegatronTP: return "Megatron-LM TP";
    case Method::MegatronTPSP: return "Megatron-LM TP+SP";
    case Method::MegatronCP: return "Megatron-LM CP";
    case Method::DeepSpeedUlysses: return "DeepSpeed Ulysses";
    case Method::DeepSpeedZeRO3: return "DeepSpeed ZeRO3";
    case Method::ColossalAISP: return "Colossal-AI SP";
    case Method::METP: return "METP";
  }
  return "?";
}

bool is_activation(Role role) {
  return role == Role::XMha || role == Role::O || role == Role::XFfn || role == Role::Z;
}

namespace {

constexpr SymDim B{1, Axis::b};
constexpr SymDim S{1, Axis::s};
constexpr SymDim H{1, Axis::h};
constexpr SymDim H3{3, Axis::h};
constexpr SymDim H4{4, Axis::h};

char axis_char(Axis a) {
  switch (a) {
    case Axis::b: return 'b';
    case Axis::s: return 's';
    case Axis::h: return 'h';
  }
  return '?';
}

// Residual stream hand-offs: MHA output feeds FFN input, FFN output feeds
// the next layer's MHA input.
int role_family(Role role) {
  switch (role) {
    case Role::O:
    case Role::XFfn: return 0;
    case Role::Z:
    case Role::XMha: return 1;
    default: return 2 + static_cast<int>(role);
  }
}

struct Shape2 {
  std::vector<SymDim> dims;
  std::optional<int> shard;
  bool transposed = false;
};

TensorLayout build(Role role, Shape2 s, const ModelConfig& cfg, std::int64_t seq_len, int p) {
  cfg.validate();
  if (p < 1) throw std::invalid_argument("p must be >= 1");
  if (is_activation(role) && seq_len < 1) {
    throw std::invalid_argument("sequence length must be >= 1");
  }
  TensorLayout l;
  l.role = role;
  l.dims = std::move(s.dims);
  l.shard_dim = s.shard;
  l.shard_count = p;
  l.transposed = s.transposed;
  for (const auto& d : l.dims) {
    const std::int64_t base = d.axis == Axis::b ? cfg.b : d.axis == Axis::s ? seq_len : cfg.h;
    l.full_shape.push_back(d.coef * base);
  }
  if (l.shard_dim) {
    const auto i = static_cast<std::size_t>(*l.shard_dim);
    if (l.full_shape[i] % p != 0) {
      throw std::invalid_argument(
          std::string(role_name(role)) + ": axis " +
          (l.dims[i].coef == 1 ? "" : std::to_string(l.dims[i].coef)) +
          axis_char(l.dims[i].axis) + " (extent " + std::to_string(l.full_shape[i]) +
          ") not divisible by p=" + std::to_string(p));
    }
  }
  return l;
}

Shape2 activation(std::optional<Axis> split) {
  Shape2 s{{B, S, H}, std::nullopt, false};
  if (split == Axis::b) s.shard = 0;
  if (split == Axis::s) s.shard = 1;
  if (split == Axis::h) s.shard = 2;
  return s;
}

// Weight layouts shared by several rows of the catalogue.
Shape2 tensor_parallel_weight(Role role) {
  switch (role) {
    case Role::WQkv: return {{H, H3}, 1, false};
    case Role::WProj: return {{H, H}, 0, false};
    case Role::WIn: return {{H, H4}, 1, false};
    case Role::WOut: return {{H4, H}, 0, false};
    default: break;
  }
  throw std::logic_error("not a weight role");
}

Shape2 replicated_weight(Role role) {
  switch (role) {
    case Role::WQkv: return {{H, H3}, std::nullopt, false};
    case Role::WProj: return {{H, H}, std::nullopt, false};
    case Role::WIn: return {{H, H4}, std::nullopt, false};
    case Role::WOut: return {{H4, H}, std::nullopt, false};
    default: break;
  }
  throw std::logic_error("not a weight role");
}

Shape2 zero3_weight(Role role) {
  switch (role) {
    case Role::WQkv: return {{H, H3}, 0, true};
    case Role::WProj: return {{H, H}, 0, false};
    case Role::WIn: return {{H, H4}, 0, true};
    case Role::WOut: return {{H4, H}, 0, false};
    default: break;
  }
  throw std::logic_error("not a weight role");
}

Shape2 spec_weight(Role role) {
  switch (role) {
    case Role::WQkv: return {{H3, H}, 0, true};
    case Role::WProj: return {{H, H}, 0, false};
    case Role::WIn: return {{H4, H}, 0, true};
    case Role::WOut: return {{H4, H}, 0, false};
    default: break;
  }
  throw std::logic_error("not a weight role");
}

}  // namespace

std::optional<int> TensorLayout::effective_shard_dim() const {
  if (shard_count > 1) return shard_dim;
  return std::nullopt;
}

Shape TensorLayout::shard_shape() const {
  Shape s = full_shape;
  if (auto d = effective_shard_dim()) s[static_cast<std::size_t>(*d)] /= shard_count;
  return s;
}

Shape TensorLayout::dense_shape() const {
  if (!transposed) return full_shape;
  return Shape(full_shape.rbegin(), full_shape.rend());
}

std::string TensorLayout::symbolic() const {
  std::string out;
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) out += "×";
    if (dims[i].coef != 1) out += std::to_string(dims[i].coef);
    out += axis_char(dims[i].axis);
    if (shard_dim && *shard_dim == static_cast<int>(i)) out += "/p";
  }
  return transposed ? "(" + out + ")^T" : out;
}

TensorLayout spec_layout(Role role, const ModelConfig& config, std::int64_t seq_len, int p) {
  if (is_activation(role)) return build(role, activation(Axis::s), config, seq_len, p);
  return build(role, spec_weight(role), config, seq_len, p);
}

TensorLayout method_layout(Method method, Role role, const ModelConfig& config,
                           std::int64_t seq_len, int p) {
  if (is_activation(role)) {
    std::optional<Axis> split = Axis::s;
    if (method == Method::MegatronTP) split = std::nullopt;
    if (method == Method::DeepSpeedZeRO3) split = Axis::b;
    return build(role, activation(split), config, seq_len, p);
  }
  switch (method) {
    case Method::MegatronTP:
    case Method::MegatronTPSP:
    case Method::METP:
      return build(role, tensor_parallel_weight(role), config, seq_len, p);
    case Method::MegatronCP:
    case Method::DeepSpeedUlysses:
    case Method::ColossalAISP:
      return build(role, replicated_weight(role), config, seq_len, p);
    case Method::DeepSpeedZeRO3:
      return build(role, zero3_weight(role), config, seq_len, p);
  }
  throw std::invalid_argument("unknown parallel method");
}

bool compatible(const TensorLayout& producer, const TensorLayout& consumer) {
  if (role_family(producer.role) != role_family(consumer.role)) return false;
  return producer.full_shape == consumer.full_shape &&
         producer.effective_shard_dim() == consumer.effective_shard_dim() &&
         producer.shard_count == consumer.shard_count &&
         producer.transposed == consumer.transposed;
}

Shards shard(const SimTensor& dense, const TensorLayout& layout, const DeviceGrid& grid) {
  if (dense.shape != layout.dense_shape()) {
    throw std::invalid_argument(std::string(role_name(layout.role)) + ": dense shape " +
                                shape_str(dense.shape) + " does not match layout " +
                                shape_str(layout.dense_shape()));
  }
  if (grid.size() != layout.shard_count) {
    throw std::invalid_argument("layout shard count " + std::to_string(layout.shard_count) +
                                " does not match grid size " + std::to_string(grid.size()));
  }
  const SimTensor stored = layout.transposed ? transpose2d(dense) : dense;
  Shards out;
  out.reserve(static_cast<std::size_t>(grid.size()));
  const auto split = layout.effective_shard_dim();
  for (int d = 0; d < grid.size(); ++d) {
    if (split) {
      const auto chunk = stored.dim(*split) / layout.shard_count;
      out.push_back(slice(stored, *split, d * chunk, chunk));
    } else {
      out.push_back(stored);
    }
    out.back().device = d;
  }
  return out;
}

void check_conformance(std::span<const SimTensor> shards, const TensorLayout& layout) {
  if (static_cast<int>(shards.size()) != layout.shard_count) {
    throw std::invalid_argument(std::string(role_name(layout.role)) + ": expected " +
                                std::to_string(layout.shard_count) + " shards, got " +
                                std::to_string(shards.size()));
  }
  const Shape want = layout.shard_shape();
  for (std::size_t d = 0; d < shards.size(); ++d) {
    if (shards[d].shape != want) {
      throw std::invalid_argument(std::string(role_name(layout.role)) + ": shard " +
                                  std::to_string(d) + " has shape " +
                                  shape_str(shards[d].shape) + ", layout " +
                                  layout.symbolic() + " requires " + shape_str(want));
    }
  }
}

SimTensor unshard(std::span<const SimTensor> shards, const TensorLayout& layout) {
  check_conformance(shards, layout);
  SimTensor stored = layout.effective_shard_dim() ? concat(shards, *layout.effective_shard_dim())
                                                  : shards.front();
  stored.device = 0;
  return layout.transposed ? transpose2d(stored) : stored;
}

std::string layout_table_json(const ModelConfig& config, std::int64_t seq_len, int p) {
  auto row = [&](std::string name, auto&& layout_of) {
    nlohmann::ordered_json r;
    r["method"] = std::move(name);
    r["X_MHA, O, X_FFN, Z"] = layout_of(Role::XMha).symbolic();
    for (Role w : {Role::WQkv, Role::WProj, Role::WIn, Role::WOut}) {
      r[std::string(role_name(w))] = layout_of(w).symbolic();
    }
    return r;
  };
  nlohmann::ordered_json doc;
  doc["rows"] = nlohmann::ordered_json::array();
  for (Method m : kAllMethods) {
    doc["rows"].push_back(row(std::string(method_name(m)), [&](Role r) {
      return method_layout(m, r, config, seq_len, p);
    }));
  }
  doc["rows"].push_back(row("Specification", [&](Role r) {
    return spec_layout(r, config, seq_len, p);
  }));
  return doc.dump(2);
}

}  // namespace hotswitch
