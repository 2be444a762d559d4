#pragma once

#include "agscl/nn.hpp"
#include "agscl/types.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace agscl {

/// Incoming group of a node: row `node.index` of layer matrix `node.layer`, all `length`
/// columns (fan_in weights followed by the bias).
struct IncomingSlice {
  std::size_t layer = 0;
  std::size_t row = 0;
  std::size_t length = 0;
};

/// The part of an upper node's incoming group that reads from one lower node: columns
/// [begin, begin + length) of `upper`'s row. Length is 1 between dense layers, kh*kw
/// between conv layers, and out_h*out_w across the conv-to-dense flatten.
struct OutgoingSlice {
  NodeId upper;
  std::size_t begin = 0;
  std::size_t length = 0;

  bool operator==(const OutgoingSlice&) const = default;
};

/// Addressing of node groups for a fixed layer chain. Immutable after construction.
class GroupLayout {
 public:
  GroupLayout() = default;
  explicit GroupLayout(std::vector<LayerSpec> specs);

  std::size_t layer_count() const { return specs_.size(); }
  std::size_t nodes_in_layer(std::size_t layer) const { return specs_.at(layer).node_count; }
  std::size_t node_count() const { return node_count_; }
  std::size_t hidden_scalar_count() const { return scalar_count_; }
  const std::vector<LayerSpec>& specs() const { return specs_; }

  bool contains(NodeId node) const;
  /// Every node, ordered by (layer, index).
  std::vector<NodeId> nodes() const;

  /// Throws LookupError for unknown nodes.
  IncomingSlice incoming(NodeId node) const;
  std::span<const OutgoingSlice> outgoing(NodeId node) const;

  /// Lower node feeding column `column` of a row in `layer`. False for the bias column and
  /// for first-layer columns, which read raw inputs.
  bool source_of(std::size_t layer, std::size_t column, NodeId& source) const;

 private:
  std::vector<LayerSpec> specs_;
  std::vector<std::vector<std::vector<OutgoingSlice>>> outgoing_;
  std::size_t node_count_ = 0;
  std::size_t scalar_count_ = 0;
};

GroupLayout build_layout(std::span<const LayerSpec> specs);

/// Read/write view of θ for one node (incoming weights then bias).
std::span<double> group_view(NetworkParams& params, const GroupLayout& layout, NodeId node);
std::span<const double> group_view(const NetworkParams& params, const GroupLayout& layout,
                                   NodeId node);

/// Same view over a bare stack of layer matrices (anchors, gradients).
std::span<double> group_view(std::vector<Matrix>& layers, const GroupLayout& layout, NodeId node);
std::span<const double> group_view(const std::vector<Matrix>& layers, const GroupLayout& layout,
                                   NodeId node);

/// Coordinates θ_{n,i} for i = node over every upper hidden node n. Empty for the last hidden
/// layer: head weights are never addressed.
std::vector<OutgoingSlice> outgoing_coords(const GroupLayout& layout, NodeId node);

double l2_norm(std::span<const double> v);

}  // namespace agscl
