#include "agscl/nn.hpp"

#include "agscl/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace agscl {

LayerSpec LayerSpec::dense(std::size_t fan_in, std::size_t nodes) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.fan_in = fan_in;
  s.node_count = nodes;
  return s;
}

LayerSpec LayerSpec::conv2d(const ConvGeometry& geometry, std::size_t filters) {
  LayerSpec s;
  s.kind = LayerKind::conv2d;
  s.conv = geometry;
  s.fan_in = geometry.in_channels * geometry.kernel_h * geometry.kernel_w;
  s.node_count = filters;
  return s;
}

std::size_t LayerSpec::spatial() const {
  return kind == LayerKind::dense ? 1 : conv.out_height() * conv.out_width();
}

std::size_t LayerSpec::input_width() const {
  return kind == LayerKind::dense ? fan_in : conv.in_channels * conv.in_height * conv.in_width;
}

std::size_t LayerSpec::output_width() const { return node_count * spatial(); }

void validate_specs(std::span<const LayerSpec> specs) {
  if (specs.empty()) throw ConfigError("network needs at least one hidden layer");
  bool seen_dense = false;
  for (std::size_t l = 0; l < specs.size(); ++l) {
    const auto& s = specs[l];
    if (s.node_count == 0) throw ConfigError(fmt::format("layer {} has no nodes", l));
    if (s.fan_in == 0) throw ConfigError(fmt::format("layer {} has zero fan-in", l));
    if (s.kind == LayerKind::conv2d) {
      if (seen_dense) throw ConfigError(fmt::format("conv layer {} follows a dense layer", l));
      const auto& g = s.conv;
      if (g.stride == 0 || g.kernel_h == 0 || g.kernel_w == 0)
        throw ConfigError(fmt::format("layer {}: zero stride or kernel size", l));
      if (g.kernel_h > g.in_height + 2 * g.padding || g.kernel_w > g.in_width + 2 * g.padding)
        throw ConfigError(fmt::format("layer {}: kernel larger than padded input", l));
      if (s.fan_in != g.in_channels * g.kernel_h * g.kernel_w)
        throw ConfigError(fmt::format("layer {}: fan_in {} != channels*kernel {}", l, s.fan_in,
                                      g.in_channels * g.kernel_h * g.kernel_w));
      if (l > 0) {
        const auto& prev = specs[l - 1];
        if (prev.node_count != g.in_channels || prev.conv.out_height() != g.in_height ||
            prev.conv.out_width() != g.in_width)
          throw ConfigError(fmt::format("layer {}: input shape does not match layer {} output", l,
                                        l - 1));
      }
    } else {
      seen_dense = true;
    }
    if (l > 0 && s.input_width() != specs[l - 1].output_width())
      throw ConfigError(fmt::format("layer {} consumes {} values but layer {} produces {}", l,
                                    s.input_width(), l - 1, specs[l - 1].output_width()));
  }
}

std::size_t NetworkParams::hidden_scalar_count() const {
  std::size_t n = 0;
  for (const auto& w : layers) n += static_cast<std::size_t>(w.size());
  return n;
}

std::size_t NetworkParams::node_count() const {
  std::size_t n = 0;
  for (const auto& s : specs) n += s.node_count;
  return n;
}

GradientSet GradientSet::zeros_like(const NetworkParams& params) {
  GradientSet g;
  for (const auto& w : params.layers) g.layers.push_back(Matrix::Zero(w.rows(), w.cols()));
  for (const auto& h : params.heads) g.heads.push_back(Matrix::Zero(h.rows(), h.cols()));
  return g;
}

bool GradientSet::all_finite() const {
  const auto finite = [](const Matrix& m) { return m.allFinite(); };
  return std::all_of(layers.begin(), layers.end(), finite) &&
         std::all_of(heads.begin(), heads.end(), finite);
}

void draw_group(std::span<double> group, std::size_t fan_in, Rng& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  for (std::size_t k = 0; k < fan_in; ++k) group[k] = dist(rng);
  group[fan_in] = 0.0;
}

namespace {

void draw_matrix(Matrix& m, std::size_t fan_in, Rng& rng) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    draw_group(std::span<double>(m.row(r).data(), static_cast<std::size_t>(m.cols())), fan_in, rng);
}

// Unfolds one example (channel-major input) into a positions x fan_in patch matrix whose
// column order matches a filter row: (channel, ky, kx).
Matrix im2col(const double* input, const ConvGeometry& g) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t fan = g.in_channels * g.kernel_h * g.kernel_w;
  Matrix cols = Matrix::Zero(static_cast<Eigen::Index>(oh * ow), static_cast<Eigen::Index>(fan));
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      double* row = cols.row(static_cast<Eigen::Index>(oy * ow + ox)).data();
      for (std::size_t c = 0; c < g.in_channels; ++c) {
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                         static_cast<std::ptrdiff_t>(g.padding);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.in_height)) continue;
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const auto x = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                           static_cast<std::ptrdiff_t>(g.padding);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.in_width)) continue;
            row[(c * g.kernel_h + ky) * g.kernel_w + kx] =
                input[(c * g.in_height + static_cast<std::size_t>(y)) * g.in_width +
                      static_cast<std::size_t>(x)];
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatters patch gradients back into a channel-major input gradient.
void col2im_add(const Matrix& dcols, const ConvGeometry& g, double* dinput) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  for (std::size_t oy = 0; oy < oh; ++oy) {
    for (std::size_t ox = 0; ox < ow; ++ox) {
      const double* row = dcols.row(static_cast<Eigen::Index>(oy * ow + ox)).data();
      for (std::size_t c = 0; c < g.in_channels; ++c) {
        for (std::size_t ky = 0; ky < g.kernel_h; ++ky) {
          const auto y = static_cast<std::ptrdiff_t>(oy * g.stride + ky) -
                         static_cast<std::ptrdiff_t>(g.padding);
          if (y < 0 || y >= static_cast<std::ptrdiff_t>(g.in_height)) continue;
          for (std::size_t kx = 0; kx < g.kernel_w; ++kx) {
            const auto x = static_cast<std::ptrdiff_t>(ox * g.stride + kx) -
                           static_cast<std::ptrdiff_t>(g.padding);
            if (x < 0 || x >= static_cast<std::ptrdiff_t>(g.in_width)) continue;
            dinput[(c * g.in_height + static_cast<std::size_t>(y)) * g.in_width +
                   static_cast<std::size_t>(x)] += row[(c * g.kernel_h + ky) * g.kernel_w + kx];
          }
        }
      }
    }
  }
}

Matrix dense_forward(const Matrix& in, const Matrix& w) {
  const Eigen::Index fan = w.cols() - 1;
  Matrix z = in * w.leftCols(fan).transpose();
  z.rowwise() += w.col(fan).transpose();
  return z;
}

Matrix conv_forward(const Matrix& in, const Matrix& w, const LayerSpec& spec) {
  const auto positions = static_cast<Eigen::Index>(spec.spatial());
  const Eigen::Index fan = w.cols() - 1;
  Matrix z(in.rows(), static_cast<Eigen::Index>(spec.output_width()));
  for (Eigen::Index e = 0; e < in.rows(); ++e) {
    const Matrix cols = im2col(in.row(e).data(), spec.conv);
    Matrix ze = cols * w.leftCols(fan).transpose();  // positions x channels
    ze.rowwise() += w.col(fan).transpose();
    for (Eigen::Index c = 0; c < ze.cols(); ++c)
      for (Eigen::Index p = 0; p < positions; ++p) z(e, c * positions + p) = ze(p, c);
  }
  return z;
}

const Matrix& head_of(const NetworkParams& params, std::size_t task) {
  if (task >= params.heads.size())
    throw LookupError(fmt::format("no head for task {} ({} heads)", task, params.heads.size()));
  return params.heads[task];
}

void check_inputs(const NetworkParams& params, const Matrix& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != params.input_width())
    throw DataError(fmt::format("batch has {} features, network expects {}", inputs.cols(),
                                params.input_width()));
}

// Row-wise log-softmax normaliser.
Eigen::VectorXd log_sum_exp(const Matrix& logits) {
  Eigen::VectorXd out(logits.rows());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out(r) = m + std::log((logits.row(r).array() - m).exp().sum());
  }
  return out;
}

void check_labels(std::span<const int> labels, Eigen::Index classes, Eigen::Index rows) {
  if (static_cast<Eigen::Index>(labels.size()) != rows)
    throw DataError(fmt::format("{} labels for {} examples", labels.size(), rows));
  for (const int y : labels)
    if (y < 0 || y >= classes)
      throw DataError(fmt::format("label {} outside head range 0..{}", y, classes - 1));
}

}  // namespace

NetworkParams init_network(std::vector<LayerSpec> specs, std::span<const std::size_t> head_dims,
                           Rng& rng) {
  validate_specs(specs);
  if (head_dims.empty()) throw ConfigError("network needs at least one head");
  NetworkParams p;
  p.specs = std::move(specs);
  for (const auto& s : p.specs) {
    Matrix w(static_cast<Eigen::Index>(s.node_count), static_cast<Eigen::Index>(s.fan_in + 1));
    draw_matrix(w, s.fan_in, rng);
    p.layers.push_back(std::move(w));
  }
  const std::size_t width = p.last_hidden_width();
  for (const std::size_t classes : head_dims) {
    if (classes == 0) throw ConfigError("head with zero classes");
    Matrix h(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(width + 1));
    draw_matrix(h, width, rng);
    p.heads.push_back(std::move(h));
  }
  return p;
}

ForwardTrace forward(const NetworkParams& params, const Matrix& inputs, std::size_t task,
                     const NodeValues* pruned) {
  const Matrix& head = head_of(params, task);
  check_inputs(params, inputs);
  ForwardTrace trace;
  trace.activations.reserve(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Matrix& in = l == 0 ? inputs : trace.activations.back();
    const auto& spec = params.specs[l];
    Matrix a = spec.kind == LayerKind::dense ? dense_forward(in, params.layers[l])
                                             : conv_forward(in, params.layers[l], spec);
    a = a.cwiseMax(0.0);
    if (pruned != nullptr) {
      const auto positions = static_cast<Eigen::Index>(spec.spatial());
      for (std::size_t n = 0; n < spec.node_count; ++n)
        if ((*pruned)[l][n] != 0.0)
          a.middleCols(static_cast<Eigen::Index>(n) * positions, positions).setZero();
    }
    trace.activations.push_back(std::move(a));
  }
  trace.logits = dense_forward(trace.activations.back(), head);
  return trace;
}

double task_loss(const NetworkParams& params, const Matrix& inputs, std::span<const int> labels,
                 std::size_t task) {
  const ForwardTrace trace = forward(params, inputs, task);
  check_labels(labels, trace.logits.cols(), trace.logits.rows());
  const Eigen::VectorXd lse = log_sum_exp(trace.logits);
  double loss = 0.0;
  for (Eigen::Index r = 0; r < trace.logits.rows(); ++r)
    loss += lse(r) - trace.logits(r, labels[static_cast<std::size_t>(r)]);
  return loss / static_cast<double>(trace.logits.rows());
}

std::pair<double, GradientSet> task_loss_and_grad(const NetworkParams& params, const Matrix& inputs,
                                                  std::span<const int> labels, std::size_t task) {
  const ForwardTrace trace = forward(params, inputs, task);
  const Matrix& logits = trace.logits;
  check_labels(labels, logits.cols(), logits.rows());
  const Eigen::Index batch = logits.rows();
  const double inv_batch = 1.0 / static_cast<double>(batch);

  const Eigen::VectorXd lse = log_sum_exp(logits);
  Matrix dlogits(batch, logits.cols());
  double loss = 0.0;
  for (Eigen::Index r = 0; r < batch; ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    loss += lse(r) - logits(r, y);
    dlogits.row(r) = (logits.row(r).array() - lse(r)).exp() * inv_batch;
    dlogits(r, y) -= inv_batch;
  }
  loss *= inv_batch;

  GradientSet grads = GradientSet::zeros_like(params);
  const Matrix& head = params.heads[task];
  const Eigen::Index width = head.cols() - 1;
  const Matrix& top = trace.activations.back();
  grads.heads[task].leftCols(width) = dlogits.transpose() * top;
  grads.heads[task].col(width) = dlogits.colwise().sum().transpose();

  Matrix dact = dlogits * head.leftCols(width);
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Matrix& in = l == 0 ? inputs : trace.activations[l - 1];
    const Matrix& w = params.layers[l];
    const auto& spec = params.specs[l];
    const Eigen::Index fan = w.cols() - 1;
    const Matrix dz =
        dact.cwiseProduct((trace.activations[l].array() > 0.0).cast<double>().matrix());
    Matrix& gw = grads.layers[l];
    if (spec.kind == LayerKind::dense) {
      gw.leftCols(fan) = dz.transpose() * in;
      gw.col(fan) = dz.colwise().sum().transpose();
      if (l > 0) dact = dz * w.leftCols(fan);
      continue;
    }
    const auto positions = static_cast<Eigen::Index>(spec.spatial());
    const auto channels = static_cast<Eigen::Index>(spec.node_count);
    Matrix dprev;
    if (l > 0) dprev = Matrix::Zero(in.rows(), in.cols());
    Matrix dze(positions, channels);
    for (Eigen::Index e = 0; e < in.rows(); ++e) {
      for (Eigen::Index c = 0; c < channels; ++c)
        for (Eigen::Index p = 0; p < positions; ++p) dze(p, c) = dz(e, c * positions + p);
      const Matrix cols = im2col(in.row(e).data(), spec.conv);
      gw.leftCols(fan).noalias() += dze.transpose() * cols;
      gw.col(fan) += dze.colwise().sum().transpose();
      if (l > 0) {
        const Matrix dcols = dze * w.leftCols(fan);
        col2im_add(dcols, spec.conv, dprev.row(e).data());
      }
    }
    if (l > 0) dact = std::move(dprev);
  }
  return {loss, std::move(grads)};
}

NodeValues mean_node_activations(const NetworkParams& params, const Dataset& data,
                                 std::size_t task, std::size_t batch_size) {
  if (data.size() == 0) throw DataError("cannot average activations over an empty dataset");
  if (batch_size == 0) batch_size = data.size();
  NodeValues sums;
  for (const auto& s : params.specs) sums.emplace_back(s.node_count, 0.0);
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - begin);
    const ForwardTrace trace = forward(params, slice_rows(data.inputs, begin, count), task);
    for (Eigen::Index e = 0; e < static_cast<Eigen::Index>(count); ++e) {
      for (std::size_t l = 0; l < params.specs.size(); ++l) {
        const auto positions = static_cast<Eigen::Index>(params.specs[l].spatial());
        const Matrix& a = trace.activations[l];
        for (std::size_t n = 0; n < params.specs[l].node_count; ++n) {
          const auto offset = static_cast<Eigen::Index>(n) * positions;
          const double v = positions == 1 ? a(e, offset)
                                          : a.row(e).segment(offset, positions).sum() /
                                                static_cast<double>(positions);
          sums[l][n] += v;
        }
      }
    }
  }
  const auto n = static_cast<double>(data.size());
  for (auto& layer : sums)
    for (auto& v : layer) v /= n;
  return sums;
}

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t count) {
  return m.middleRows(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(count));
}

}  // namespace agscl
