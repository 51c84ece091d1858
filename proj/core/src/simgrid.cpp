// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

#include "hotswitch/simgrid.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hotswitch {

std::string_view primitive_name(Primitive p) {
  switch (p) {
    case Primitive::AllGather: return "AllGather";
    case Primitive::ReduceScatter: return "ReduceScatter";
    case Primitive::AllReduce: return "AllReduce";
    case Primitive::AllToAll: return "AllToAll";
    case Primitive::RingPass: return "RingPass";
  }
  return "?";
}

// ---------------------------------------------------------------- leases

MemoryLease::MemoryLease(DeviceGrid& grid, int device, std::int64_t bytes, MemKind kind)
    : grid_(&grid), device_(device), bytes_(bytes), kind_(kind) {
  grid_->track_alloc(device_, bytes_, kind_);
}

MemoryLease::MemoryLease(MemoryLease&& other) noexcept
    : grid_(other.grid_), device_(other.device_), bytes_(other.bytes_), kind_(other.kind_) {
  other.grid_ = nullptr;
  other.bytes_ = 0;
}

MemoryLease& MemoryLease::operator=(MemoryLease&& other) noexcept {
  if (this != &other) {
    release();
    grid_ = other.grid_;
    device_ = other.device_;
    bytes_ = other.bytes_;
    kind_ = other.kind_;
    other.grid_ = nullptr;
    other.bytes_ = 0;
  }
  return *this;
}

MemoryLease::~MemoryLease() { release(); }

void MemoryLease::release() {
  if (grid_ != nullptr && bytes_ != 0) grid_->track_alloc(device_, -bytes_, kind_);
  grid_ = nullptr;
  bytes_ = 0;
}

// ------------------------------------------------------------------ grid

DeviceGrid::DeviceGrid(int p, std::int64_t capacity_bytes, int bytes_per_elem)
    : p_(p), capacity_(capacity_bytes), bytes_per_elem_(bytes_per_elem) {
  if (p < 1) throw std::invalid_argument("device grid needs p >= 1, got " + std::to_string(p));
  if (capacity_bytes < 1) throw std::invalid_argument("device capacity must be positive");
  if (bytes_per_elem < 1) throw std::invalid_argument("bytes_per_elem must be positive");
  const auto n = static_cast<std::size_t>(p);
  total_.resize(n);
  activation_.resize(n);
  parameter_.resize(n);
}

DeviceGrid create_grid(int p, std::int64_t capacity_bytes) {
  return DeviceGrid(p, capacity_bytes);
}

void DeviceGrid::check_device(int device) const {
  if (device < 0 || device >= p_) {
    throw std::out_of_range("device " + std::to_string(device) + " outside grid of " +
                            std::to_string(p_));
  }
}

DeviceGrid::Counters& DeviceGrid::counters(int device, MemKind kind) {
  check_device(device);
  auto& v = kind == MemKind::Activation ? activation_ : parameter_;
  return v[static_cast<std::size_t>(device)];
}

const DeviceGrid::Counters& DeviceGrid::counters(int device, MemKind kind) const {
  check_device(device);
  const auto& v = kind == MemKind::Activation ? activation_ : parameter_;
  return v[static_cast<std::size_t>(device)];
}

void DeviceGrid::track_alloc(int device, std::int64_t delta_bytes, MemKind kind) {
  auto& part = counters(device, kind);
  auto& total = total_[static_cast<std::size_t>(device)];
  if (part.alloc + delta_bytes < 0) {
    throw std::logic_error("allocation underflow on device " + std::to_string(device) + ": " +
                           std::to_string(part.alloc) + " + " + std::to_string(delta_bytes));
  }
  part.alloc += delta_bytes;
  part.peak = std::max(part.peak, part.alloc);
  total.alloc += delta_bytes;
  total.peak = std::max(total.peak, total.alloc);
}

MemoryLease DeviceGrid::lease(int device, std::int64_t elements, MemKind kind) {
  return MemoryLease(*this, device, elements * bytes_per_elem_, kind);
}

std::int64_t DeviceGrid::alloc_bytes(int device) const {
  check_device(device);
  return total_[static_cast<std::size_t>(device)].alloc;
}

std::int64_t DeviceGrid::peak_bytes(int device) const {
  check_device(device);
  return total_[static_cast<std::size_t>(device)].peak;
}

std::int64_t DeviceGrid::alloc_bytes(int device, MemKind kind) const {
  return counters(device, kind).alloc;
}

std::int64_t DeviceGrid::peak_bytes(int device, MemKind kind) const {
  return counters(device, kind).peak;
}

std::int64_t DeviceGrid::max_peak_bytes() const {
  std::int64_t m = 0;
  for (const auto& c : total_) m = std::max(m, c.peak);
  return m;
}

std::int64_t DeviceGrid::max_peak_bytes(MemKind kind) const {
  const auto& v = kind == MemKind::Activation ? activation_ : parameter_;
  std::int64_t m = 0;
  for (const auto& c : v) m = std::max(m, c.peak);
  return m;
}

void DeviceGrid::reset_peaks() {
  for (auto* v : {&total_, &activation_, &parameter_}) {
    for (auto& c : *v) c.peak = c.alloc;
  }
}

void DeviceGrid::record(Primitive primitive, std::int64_t bytes) {
  std::vector<int> participants(static_cast<std::size_t>(p_));
  std::iota(participants.begin(), participants.end(), 0);
  log_.push_back(CommRecord{primitive, bytes, std::move(participants)});
}

std::string DeviceGrid::comm_log_jsonl() const {
  std::ostringstream os;
  for (const auto& r : log_) {
    os << "{\"primitive\": \"" << primitive_name(r.primitive) << "\", \"bytes\": " << r.bytes
       << ", \"participants\": [";
    for (std::size_t i = 0; i < r.participants.size(); ++i) {
      if (i) os << ", ";
      os << r.participants[i];
    }
    os << "]}\n";
  }
  return os.str();
}

// ----------------------------------------------------------- collectives

namespace {

void require_one_per_device(const DeviceGrid& grid, std::span<const SimTensor> ts,
                            std::string_view op) {
  if (static_cast<int>(ts.size()) != grid.size()) {
    throw std::invalid_argument(std::string(op) + ": expected " + std::to_string(grid.size()) +
                                " device tensors, got " + std::to_string(ts.size()));
  }
}

void require_same_shape(std::span<const SimTensor> ts, std::string_view op) {
  for (const auto& t : ts) {
    if (t.shape != ts.front().shape) {
      throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(t.shape) +
                                  " vs " + shape_str(ts.front().shape));
    }
  }
}

std::int64_t ring_share(std::int64_t bytes, int p) {
  return bytes * (p - 1) / p;
}

SimTensor sum_all(std::span<const SimTensor> ts) {
  SimTensor acc = ts.front();
  for (std::size_t i = 1; i < ts.size(); ++i) add_inplace(acc, ts[i]);
  return acc;
}

}  // namespace

Shards all_gather(DeviceGrid& grid, std::span<const SimTensor> shards, int axis) {
  require_one_per_device(grid, shards, "all_gather");
  SimTensor full = concat(shards, axis);  // validates off-axis extents
  grid.record(Primitive::AllGather, ring_share(grid.tensor_bytes(full), grid.size()));
  Shards out(static_cast<std::size_t>(grid.size()), full);
  for (int d = 0; d < grid.size(); ++d) out[static_cast<std::size_t>(d)].device = d;
  return out;
}

Shards reduce_scatter(DeviceGrid& grid, std::span<const SimTensor> tensors, int axis) {
  require_one_per_device(grid, tensors, "reduce_scatter");
  require_same_shape(tensors, "reduce_scatter");
  const auto extent = tensors.front().dim(axis);
  const int p = grid.size();
  if (extent % p != 0) {
    throw std::invalid_argument("reduce_scatter: axis " + std::to_string(axis) + " extent " +
                                std::to_string(extent) + " not divisible by p=" +
                                std::to_string(p));
  }
  const SimTensor sum = sum_all(tensors);
  grid.record(Primitive::ReduceScatter, ring_share(grid.tensor_bytes(sum), p));
  Shards out;
  out.reserve(static_cast<std::size_t>(p));
  const auto chunk = extent / p;
  for (int d = 0; d < p; ++d) {
    out.push_back(slice(sum, axis, d * chunk, chunk));
    out.back().device = d;
  }
  return out;
}

Shards all_reduce(DeviceGrid& grid, std::span<const SimTensor> tensors) {
  require_one_per_device(grid, tensors, "all_reduce");
  require_same_shape(tensors, "all_reduce");
  const SimTensor sum = sum_all(tensors);
  grid.record(Primitive::AllReduce, 2 * ring_share(grid.tensor_bytes(sum), grid.size()));
  Shards out(static_cast<std::size_t>(grid.size()), sum);
  for (int d = 0; d < grid.size(); ++d) out[static_cast<std::size_t>(d)].device = d;
  return out;
}

Shards all_to_all(DeviceGrid& grid, std::span<const SimTensor> tensors, int split_axis,
                  int concat_axis) {
  require_one_per_device(grid, tensors, "all_to_all");
  const int p = grid.size();
  for (const auto& t : tensors) {
    if (t.dim(split_axis) % p != 0) {
      throw std::invalid_argument("all_to_all: split axis " + std::to_string(split_axis) +
                                  " extent " + std::to_string(t.dim(split_axis)) +
                                  " not divisible by p=" + std::to_string(p));
    }
    (void)t.dim(concat_axis);
  }
  std::int64_t largest = 0;
  for (const auto& t : tensors) largest = std::max(largest, grid.tensor_bytes(t));
  grid.record(Primitive::AllToAll, ring_share(largest, p));

  Shards out;
  out.reserve(static_cast<std::size_t>(p));
  for (int d = 0; d < p; ++d) {
    std::vector<SimTensor> pieces;
    pieces.reserve(static_cast<std::size_t>(p));
    for (const auto& src : tensors) {
      const auto chunk = src.dim(split_axis) / p;
      pieces.push_back(slice(src, split_axis, d * chunk, chunk));
    }
    out.push_back(concat(pieces, concat_axis));
    out.back().device = d;
  }
  return out;
}

Shards ring_pass(DeviceGrid& grid, std::span<const SimTensor> tensors, int step) {
  require_one_per_device(grid, tensors, "ring_pass");
  const int p = grid.size();
  std::int64_t largest = 0;
  for (const auto& t : tensors) largest = std::max(largest, grid.tensor_bytes(t));
  grid.record(Primitive::RingPass, largest);
  Shards out;
  out.reserve(static_cast<std::size_t>(p));
  const int shift = ((step % p) + p) % p;
  for (int d = 0; d < p; ++d) {
    const int src = ((d - shift) % p + p) % p;
    out.push_back(tensors[static_cast<std::size_t>(src)]);
    out.back().device = d;
  }
  return out;
}

}  // namespace hotswitch
