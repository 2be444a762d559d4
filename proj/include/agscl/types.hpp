#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

namespace agscl {

/// Row-major so that every row of a layer matrix (one node's incoming group) is contiguous.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Rng = std::mt19937_64;

/// A hidden node: `layer` counts hidden layers from 0, `index` the node within it.
/// For conv layers a node is one output channel (filter).
struct NodeId {
  std::uint32_t layer = 0;
  std::uint32_t index = 0;

  auto operator<=>(const NodeId&) const = default;
};

/// One scalar per hidden node, stored layer by layer. Used for Ω, activation means
/// and pruning masks alike.
using NodeValues = std::vector<std::vector<double>>;

}  // namespace agscl

template <>
struct std::hash<agscl::NodeId> {
  std::size_t operator()(const agscl::NodeId& id) const noexcept {
    return (static_cast<std::size_t>(id.layer) << 32) ^ id.index;
  }
};
