// Copyright 2026 The hotswitch Authors
// SPDX-License-Identifier: Apache-2.0

// In-process 1D device grid: deterministic collectives over per-device
// tensors, a communication log, and per-device memory accounting.
//
// Collectives run synchronously in device order 0..p-1. Payload bytes use
// ring-algorithm volumes per device:
//   AllGather, ReduceScatter  (p-1)/p x full tensor bytes
//   AllReduce                 2(p-1)/p x full tensor bytes
//   AllToAll                  (p-1)/p x per-device tensor bytes
//   RingPass                  largest per-device tensor bytes

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hotswitch/tensor.hpp"

namespace hotswitch {

enum class Primitive { AllGather, ReduceScatter, AllReduce, AllToAll, RingPass };

std::string_view primitive_name(Primitive p);

struct CommRecord {
  Primitive primitive;
  std::int64_t bytes;
  std::vector<int> participants;

  friend bool operator==(const CommRecord&, const CommRecord&) = default;
};

enum class MemKind { Activation, Parameter };

class DeviceGrid;

/// RAII handle for bytes charged to one device. Releasing (or destroying)
/// the lease returns the bytes to the device.
class MemoryLease {
 public:
  MemoryLease() = default;
  MemoryLease(DeviceGrid& grid, int device, std::int64_t bytes, MemKind kind);
  MemoryLease(const MemoryLease&) = delete;
  MemoryLease& operator=(const MemoryLease&) = delete;
  MemoryLease(MemoryLease&& other) noexcept;
  MemoryLease& operator=(MemoryLease&& other) noexcept;
  ~MemoryLease();

  void release();
  std::int64_t bytes() const { return bytes_; }

 private:
  DeviceGrid* grid_ = nullptr;
  int device_ = 0;
  std::int64_t bytes_ = 0;
  MemKind kind_ = MemKind::Activation;
};

class DeviceGrid {
 public:
  /// Throws std::invalid_argument for p < 1, capacity < 1 or bytes_per_elem < 1.
  DeviceGrid(int p, std::int64_t capacity_bytes, int bytes_per_elem = 2);

  int size() const { return p_; }
  std::int64_t capacity_bytes() const { return capacity_; }
  int bytes_per_elem() const { return bytes_per_elem_; }

  /// Applies a signed allocation delta. Rejects underflow below zero.
  void track_alloc(int device, std::int64_t delta_bytes, MemKind kind = MemKind::Activation);
  MemoryLease lease(int device, std::int64_t elements, MemKind kind = MemKind::Activation);

  std::int64_t alloc_bytes(int device) const;
  std::int64_t peak_bytes(int device) const;
  std::int64_t alloc_bytes(int device, MemKind kind) const;
  std::int64_t peak_bytes(int device, MemKind kind) const;
  std::int64_t max_peak_bytes() const;
  std::int64_t max_peak_bytes(MemKind kind) const;
  /// Resets high-water marks to the current allocation.
  void reset_peaks();

  void record(Primitive primitive, std::int64_t bytes);
  const std::vector<CommRecord>& comm_log() const { return log_; }
  /// One JSON object per line: {"primitive": str, "bytes": int, "participants": [int]}.
  std::string comm_log_jsonl() const;

  std::int64_t tensor_bytes(const SimTensor& t) const { return t.numel() * bytes_per_elem_; }
  void check_device(int device) const;

 private:
  struct Counters {
    std::int64_t alloc = 0;
    std::int64_t peak = 0;
  };
  Counters& counters(int device, MemKind kind);
  const Counters& counters(int device, MemKind kind) const;

  int p_;
  std::int64_t capacity_;
  int bytes_per_elem_;
  std::vector<Counters> total_;
  std::vector<Counters> activation_;
  std::vector<Counters> parameter_;
  std::vector<CommRecord> log_;
};

DeviceGrid create_grid(int p, std::int64_t capacity_bytes);

using Shards = std::vector<SimTensor>;

/// Every device receives the concatenation of all shards along `axis`.
Shards all_gather(DeviceGrid& grid, std::span<const SimTensor> shards, int axis);

/// Elementwise sum across devices, device d keeps slice d along `axis`.
Shards reduce_scatter(DeviceGrid& grid, std::span<const SimTensor> tensors, int axis);

/// Elementwise sum across devices replicated to all.
Shards all_reduce(DeviceGrid& grid, std::span<const SimTensor> tensors);

/// Device d receives chunk d of every source's `split_axis`, concatenated
/// along `concat_axis` in source order.
Shards all_to_all(DeviceGrid& grid, std::span<const SimTensor> tensors, int split_axis,
                  int concat_axis);

/// Device d receives the tensor held by device (d - step) mod p.
Shards ring_pass(DeviceGrid& grid, std::span<const SimTensor> tensors, int step = 1);

}  // namespace hotswitch
