#pragma once

#include "agscl/types.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace agscl {

enum class LayerKind { dense, conv2d };

/// Input shape and kernel geometry of a convolution layer. Square padding and stride.
struct ConvGeometry {
  std::size_t in_channels = 1;
  std::size_t in_height = 1;
  std::size_t in_width = 1;
  std::size_t kernel_h = 1;
  std::size_t kernel_w = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_height() const { return (in_height + 2 * padding - kernel_h) / stride + 1; }
  std::size_t out_width() const { return (in_width + 2 * padding - kernel_w) / stride + 1; }
};

/// One hidden layer. A node's incoming group holds `fan_in` weights plus its bias.
///
/// Conv layers must precede every dense layer; the activations of a conv layer are
/// flattened channel-major (channel, row, col) before entering a dense layer.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t fan_in = 0;
  std::size_t node_count = 0;
  ConvGeometry conv{};

  static LayerSpec dense(std::size_t fan_in, std::size_t nodes);
  static LayerSpec conv2d(const ConvGeometry& geometry, std::size_t filters);

  /// Output positions per node: 1 for dense, out_height*out_width for conv.
  std::size_t spatial() const;
  /// Flattened width of the input this layer consumes.
  std::size_t input_width() const;
  /// Flattened width of this layer's activations.
  std::size_t output_width() const;
};

/// Throws ConfigError unless the chain is consistent.
void validate_specs(std::span<const LayerSpec> specs);

/// All trainable parameters. Each hidden layer is a node_count x (fan_in + 1) matrix whose
/// row n is the incoming group of node n with the bias in the last column. Heads use the
/// same layout (classes x (last_width + 1)) but belong to no group.
struct NetworkParams {
  std::vector<LayerSpec> specs;
  std::vector<Matrix> layers;
  std::vector<Matrix> heads;

  std::size_t input_width() const { return specs.front().input_width(); }
  std::size_t last_hidden_width() const { return specs.back().output_width(); }
  std::size_t hidden_scalar_count() const;
  std::size_t node_count() const;
};

/// Per-layer post-ReLU activations (batch x output_width) and the logits of the active head.
struct ForwardTrace {
  std::vector<Matrix> activations;
  Matrix logits;
};

/// Shape-congruent with NetworkParams.
struct GradientSet {
  std::vector<Matrix> layers;
  std::vector<Matrix> heads;

  static GradientSet zeros_like(const NetworkParams& params);
  bool all_finite() const;
};

/// Inputs are one example per row; labels are dense in 0..classes-1 for their head.
struct Dataset {
  Matrix inputs;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
};

/// Draws zero-mean normal weights with variance 2/fan_in and zero bias into one group.
void draw_group(std::span<double> group, std::size_t fan_in, Rng& rng);

NetworkParams init_network(std::vector<LayerSpec> specs, std::span<const std::size_t> head_dims,
                           Rng& rng);

/// `pruned` (optional) forces the activation of every node with a nonzero entry to 0,
/// leaving parameters untouched.
ForwardTrace forward(const NetworkParams& params, const Matrix& inputs, std::size_t task,
                     const NodeValues* pruned = nullptr);

/// Mean softmax cross-entropy of the head `task` and its exact gradient. Heads other than
/// `task` get zero gradient.
std::pair<double, GradientSet> task_loss_and_grad(const NetworkParams& params, const Matrix& inputs,
                                                  std::span<const int> labels, std::size_t task);

/// Mean cross-entropy only; no backward pass.
double task_loss(const NetworkParams& params, const Matrix& inputs, std::span<const int> labels,
                 std::size_t task);

/// Mean over the dataset of each node's ReLU activation. Conv nodes contribute the spatial
/// mean of their channel. Sums run example by example in dataset order, so the result does
/// not depend on `batch_size`.
NodeValues mean_node_activations(const NetworkParams& params, const Dataset& data,
                                 std::size_t task, std::size_t batch_size = 256);

/// Rows [begin, begin+count) of a dataset.
Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t count);

}  // namespace agscl
