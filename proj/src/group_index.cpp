#include "agscl/group_index.hpp"

#include "agscl/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace agscl {

GroupLayout::GroupLayout(std::vector<LayerSpec> specs) : specs_(std::move(specs)) {
  validate_specs(specs_);
  outgoing_.resize(specs_.size());
  for (std::size_t l = 0; l < specs_.size(); ++l) {
    node_count_ += specs_[l].node_count;
    scalar_count_ += specs_[l].node_count * (specs_[l].fan_in + 1);
    outgoing_[l].resize(specs_[l].node_count);
    if (l + 1 == specs_.size()) continue;

    const LayerSpec& upper = specs_[l + 1];
    // Width of the slice one lower node owns inside an upper row.
    const std::size_t width = upper.kind == LayerKind::conv2d
                                  ? upper.conv.kernel_h * upper.conv.kernel_w
                                  : specs_[l].spatial();
    for (std::size_t i = 0; i < specs_[l].node_count; ++i) {
      auto& out = outgoing_[l][i];
      out.reserve(upper.node_count);
      for (std::size_t n = 0; n < upper.node_count; ++n)
        out.push_back({NodeId{static_cast<std::uint32_t>(l + 1), static_cast<std::uint32_t>(n)},
                       i * width, width});
    }
  }
}

bool GroupLayout::contains(NodeId node) const {
  return node.layer < specs_.size() && node.index < specs_[node.layer].node_count;
}

std::vector<NodeId> GroupLayout::nodes() const {
  std::vector<NodeId> out;
  out.reserve(node_count_);
  for (std::size_t l = 0; l < specs_.size(); ++l)
    for (std::size_t n = 0; n < specs_[l].node_count; ++n)
      out.push_back({static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(n)});
  return out;
}

IncomingSlice GroupLayout::incoming(NodeId node) const {
  if (!contains(node))
    throw LookupError(fmt::format("no node ({}, {}) in layout", node.layer, node.index));
  return {node.layer, node.index, specs_[node.layer].fan_in + 1};
}

std::span<const OutgoingSlice> GroupLayout::outgoing(NodeId node) const {
  if (!contains(node))
    throw LookupError(fmt::format("no node ({}, {}) in layout", node.layer, node.index));
  return outgoing_[node.layer][node.index];
}

bool GroupLayout::source_of(std::size_t layer, std::size_t column, NodeId& source) const {
  if (layer == 0 || layer >= specs_.size() || column >= specs_[layer].fan_in) return false;
  const LayerSpec& upper = specs_[layer];
  const std::size_t width = upper.kind == LayerKind::conv2d
                                ? upper.conv.kernel_h * upper.conv.kernel_w
                                : specs_[layer - 1].spatial();
  source = {static_cast<std::uint32_t>(layer - 1), static_cast<std::uint32_t>(column / width)};
  return true;
}

GroupLayout build_layout(std::span<const LayerSpec> specs) {
  return GroupLayout(std::vector<LayerSpec>(specs.begin(), specs.end()));
}

std::span<double> group_view(std::vector<Matrix>& layers, const GroupLayout& layout, NodeId node) {
  const IncomingSlice s = layout.incoming(node);
  return {layers[s.layer].row(static_cast<Eigen::Index>(s.row)).data(), s.length};
}

std::span<const double> group_view(const std::vector<Matrix>& layers, const GroupLayout& layout,
                                   NodeId node) {
  const IncomingSlice s = layout.incoming(node);
  return {layers[s.layer].row(static_cast<Eigen::Index>(s.row)).data(), s.length};
}

std::span<double> group_view(NetworkParams& params, const GroupLayout& layout, NodeId node) {
  return group_view(params.layers, layout, node);
}

std::span<const double> group_view(const NetworkParams& params, const GroupLayout& layout,
                                   NodeId node) {
  return group_view(params.layers, layout, node);
}

std::vector<OutgoingSlice> outgoing_coords(const GroupLayout& layout, NodeId node) {
  const auto out = layout.outgoing(node);
  return {out.begin(), out.end()};
}

double l2_norm(std::span<const double> v) {
  double sum = 0.0;
  for (const double x : v) sum += x * x;
  return std::sqrt(sum);
}

}  // namespace agscl
