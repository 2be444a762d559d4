#pragma once

#include "agscl/nn.hpp"
#include "agscl/rng.hpp"

#include <random>
#include <vector>

namespace fixtures {

using agscl::LayerSpec;
using agscl::Matrix;
using agscl::Rng;

inline std::vector<LayerSpec> mlp_specs(std::size_t in = 6, std::size_t h1 = 5, std::size_t h2 = 4) {
  return {LayerSpec::dense(in, h1), LayerSpec::dense(h1, h2)};
}

// 2x5x5 input, 3 filters of 3x3 with padding 1 and stride 2, then a dense layer.
inline std::vector<LayerSpec> conv_specs() {
  agscl::ConvGeometry g{2, 5, 5, 3, 3, 2, 1};
  const auto conv = LayerSpec::conv2d(g, 3);
  return {conv, LayerSpec::dense(conv.output_width(), 4)};
}

// Two stacked convs so that conv-to-conv outgoing slices exist.
inline std::vector<LayerSpec> conv2_specs() {
  agscl::ConvGeometry g1{1, 6, 6, 3, 3, 1, 0};
  const auto c1 = LayerSpec::conv2d(g1, 2);
  agscl::ConvGeometry g2{2, g1.out_height(), g1.out_width(), 2, 2, 1, 0};
  const auto c2 = LayerSpec::conv2d(g2, 3);
  return {c1, c2, LayerSpec::dense(c2.output_width(), 4)};
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = n(rng);
  return m;
}

inline std::vector<int> random_labels(std::size_t n, int classes, Rng& rng) {
  std::uniform_int_distribution<int> d(0, classes - 1);
  std::vector<int> out(n);
  for (auto& v : out) v = d(rng);
  return out;
}

inline agscl::NetworkParams network(const std::vector<LayerSpec>& specs,
                                    std::vector<std::size_t> heads, std::uint64_t seed) {
  Rng rng(seed);
  return agscl::init_network(specs, heads, rng);
}

}  // namespace fixtures
