#pragma once

#include "agscl/group_index.hpp"
#include "agscl/nn.hpp"
#include "agscl/types.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <vector>

namespace agscl {

/// Per-node importance Ω (≥ 0, initially 0) and its decay η.
class OmegaRegistry {
 public:
  OmegaRegistry() = default;
  explicit OmegaRegistry(const GroupLayout& layout, double eta = 0.9);

  double eta() const { return eta_; }
  double operator[](NodeId node) const { return values_.at(node.layer).at(node.index); }
  void set(NodeId node, double value);
  const NodeValues& values() const { return values_; }
  std::size_t size() const;

 private:
  NodeValues values_;
  double eta_ = 0.9;
};

/// A scalar weight fixed at zero: column `column` of the incoming group of `upper`.
struct MaskKey {
  NodeId upper;
  std::uint32_t column = 0;

  auto operator<=>(const MaskKey&) const = default;
};

/// Outgoing weights of unimportant nodes pinned to zero, with the task that created each entry.
class ZeroMask {
 public:
  void add(MaskKey key, std::uint32_t task) { entries_.emplace(key, task); }
  bool contains(MaskKey key) const { return entries_.contains(key); }
  /// Drops every entry owned by `upper`; returns how many were removed.
  std::size_t release(NodeId upper);
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::map<MaskKey, std::uint32_t>& entries() const { return entries_; }

  /// Zeroes the masked coordinates of a layer stack (parameters or gradients).
  void apply(std::vector<Matrix>& layers) const;

 private:
  std::map<MaskKey, std::uint32_t> entries_;
};

using UnimportantSet = std::set<NodeId>;

/// Ω ← η·Ω + mean activation. Throws DataError on shape mismatch or negative means.
void update_omega(OmegaRegistry& omega, const NodeValues& activation_means);

/// Nodes with Ω exactly 0.
UnimportantSet derive_g0(const OmegaRegistry& omega);

/// Nodes with Ω < tau; the thresholded definition used when training without the prox step.
UnimportantSet derive_g0_below(const OmegaRegistry& omega, double tau);

/// Sets every outgoing weight of each node in `g0` to 0 and records it in `mask` under `task`.
void zero_init(NetworkParams& params, const GroupLayout& layout, const UnimportantSet& g0,
               ZeroMask& mask, std::uint32_t task);

/// With probability rho, redraws the whole incoming group of each node in `g0` from the
/// initial distribution and releases the mask entries that node owns. Nodes are visited in
/// ascending order with one Bernoulli draw each. Returns the redrawn nodes.
std::vector<NodeId> rand_init(NetworkParams& params, const GroupLayout& layout,
                              const UnimportantSet& g0, ZeroMask& mask, double rho, Rng& rng);

void apply_mask(NetworkParams& params, const ZeroMask& mask);

/// Zeroes the columns of heads [0, heads_through] that read last-layer nodes in `g0`.
/// Heads of later tasks are left free to read those nodes.
void zero_old_head_inputs(NetworkParams& params, const GroupLayout& layout,
                          const UnimportantSet& g0, std::size_t heads_through);

}  // namespace agscl
