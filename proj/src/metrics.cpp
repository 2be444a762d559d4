#include "agscl/metrics.hpp"

#include "agscl/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace agscl {

namespace {
constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();
}

AccuracyMatrix::AccuracyMatrix(std::size_t tasks) {
  for (std::size_t i = 0; i < tasks; ++i) rows_.emplace_back(i + 1, kUnset);
}

void AccuracyMatrix::record(std::size_t i, std::size_t j, double accuracy) {
  if (i >= rows_.size()) throw UsageError(fmt::format("row {} beyond {} tasks", i, rows_.size()));
  if (j > i) throw UsageError(fmt::format("A[{}][{}] is above the diagonal", i, j));
  if (!(accuracy >= 0.0 && accuracy <= 1.0))
    throw DataError(fmt::format("accuracy {} outside [0, 1]", accuracy));
  rows_[i][j] = accuracy;
}

bool AccuracyMatrix::has(std::size_t i, std::size_t j) const {
  return i < rows_.size() && j <= i && !std::isnan(rows_[i][j]);
}

double AccuracyMatrix::at(std::size_t i, std::size_t j) const {
  if (i >= rows_.size() || j > i)
    throw UsageError(fmt::format("A[{}][{}] is undefined (task {} not yet learned)", i, j, j));
  if (std::isnan(rows_[i][j])) throw UsageError(fmt::format("A[{}][{}] not recorded", i, j));
  return rows_[i][j];
}

double AccuracyMatrix::average(std::size_t i) const {
  double sum = 0.0;
  for (std::size_t j = 0; j <= i; ++j) sum += at(i, j);
  return sum / static_cast<double>(i + 1);
}

std::size_t AccuracyMatrix::complete_rows() const {
  std::size_t n = 0;
  while (n < rows_.size() &&
         std::none_of(rows_[n].begin(), rows_[n].end(), [](double v) { return std::isnan(v); }))
    ++n;
  return n;
}

namespace {

TaskRatio mean_of(std::vector<std::optional<double>> terms) {
  TaskRatio r;
  double sum = 0.0;
  bool defined = !terms.empty();
  for (const auto& t : terms) {
    if (t)
      sum += *t;
    else
      defined = false;
  }
  if (defined) r.value = sum / static_cast<double>(terms.size());
  r.per_task = std::move(terms);
  return r;
}

void require_complete(const AccuracyMatrix& acc) {
  if (acc.tasks() == 0 || acc.complete_rows() != acc.tasks())
    throw UsageError("accuracy matrix is not complete");
}

}  // namespace

TaskRatio plasticity(const AccuracyMatrix& acc, std::span<const double> reference) {
  require_complete(acc);
  if (reference.size() != acc.tasks())
    throw UsageError(fmt::format("reference has {} entries for {} tasks", reference.size(),
                                 acc.tasks()));
  std::vector<std::optional<double>> terms;
  for (std::size_t i = 0; i < acc.tasks(); ++i)
    terms.push_back(reference[i] == 0.0 ? std::nullopt
                                        : std::optional<double>(acc.at(i, i) / reference[i]));
  return mean_of(std::move(terms));
}

TaskRatio stability(const AccuracyMatrix& acc) {
  require_complete(acc);
  const std::size_t last = acc.tasks() - 1;
  std::vector<std::optional<double>> terms;
  for (std::size_t j = 0; j <= last; ++j) {
    double best = 0.0;
    for (std::size_t i = j; i <= last; ++i) best = std::max(best, acc.at(i, j));
    terms.push_back(best == 0.0 ? std::nullopt : std::optional<double>(acc.at(last, j) / best));
  }
  return mean_of(std::move(terms));
}

double sparsity(std::size_t g0_size, std::size_t total_nodes) {
  if (total_nodes == 0) throw UsageError("sparsity of a network without nodes");
  return static_cast<double>(g0_size) / static_cast<double>(total_nodes);
}

double used_capacity(const NetworkParams& params, const PrevParams& prev,
                     const GroupLayout& layout, std::optional<double> tau) {
  std::size_t unchanged = 0;
  for (const NodeId node : layout.nodes()) {
    const auto now = group_view(params, layout, node);
    const auto before = group_view(prev.layers, layout, node);
    if (tau) {
      double sum = 0.0;
      for (std::size_t k = 0; k < now.size(); ++k) sum += (now[k] - before[k]) * (now[k] - before[k]);
      if (std::sqrt(sum) < *tau) ++unchanged;
    } else if (std::equal(now.begin(), now.end(), before.begin())) {
      ++unchanged;
    }
  }
  return static_cast<double>(unchanged) / static_cast<double>(layout.node_count());
}

double evaluate_accuracy(const NetworkParams& params, const Dataset& data, std::size_t task,
                         const NodeValues* pruned, std::size_t batch_size) {
  if (data.size() == 0) throw DataError("accuracy of an empty dataset");
  std::size_t correct = 0;
  for (std::size_t begin = 0; begin < data.size(); begin += batch_size) {
    const std::size_t count = std::min(batch_size, data.size() - begin);
    const ForwardTrace trace = forward(params, slice_rows(data.inputs, begin, count), task, pruned);
    for (Eigen::Index r = 0; r < trace.logits.rows(); ++r) {
      Eigen::Index best = 0;
      trace.logits.row(r).maxCoeff(&best);
      if (best == data.labels[begin + static_cast<std::size_t>(r)]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

double evaluate_mean_accuracy(const NetworkParams& params, std::span<const EvalSet> sets,
                              const NodeValues* pruned) {
  if (sets.empty()) throw UsageError("no evaluation sets");
  double sum = 0.0;
  for (const auto& s : sets) sum += evaluate_accuracy(params, *s.data, s.task, pruned);
  return sum / static_cast<double>(sets.size());
}

std::string to_string(AopcOrder order) {
  switch (order) {
    case AopcOrder::highest: return "highest";
    case AopcOrder::lowest: return "lowest";
    case AopcOrder::random: return "random";
  }
  return "?";
}

AopcOrder parse_aopc_order(const std::string& name) {
  if (name == "highest") return AopcOrder::highest;
  if (name == "lowest") return AopcOrder::lowest;
  if (name == "random") return AopcOrder::random;
  throw ConfigError(fmt::format("unknown AOPC order '{}'", name));
}

std::vector<NodeId> pruning_order(const GroupLayout& layout, const OmegaRegistry& omega,
                                  AopcOrder order, Rng& rng) {
  std::vector<NodeId> nodes = layout.nodes();
  switch (order) {
    case AopcOrder::highest:
      std::stable_sort(nodes.begin(), nodes.end(),
                       [&](NodeId a, NodeId b) { return omega[a] > omega[b]; });
      break;
    case AopcOrder::lowest:
      std::stable_sort(nodes.begin(), nodes.end(),
                       [&](NodeId a, NodeId b) { return omega[a] < omega[b]; });
      break;
    case AopcOrder::random:
      std::shuffle(nodes.begin(), nodes.end(), rng);
      break;
  }
  return nodes;
}

AopcCurve aopc_curve(const NetworkParams& params, const GroupLayout& layout,
                     const OmegaRegistry& omega, std::span<const EvalSet> sets, AopcOrder order,
                     std::span<const double> fractions, Rng& rng, std::size_t snapshot) {
  if (fractions.empty() || fractions.front() != 0.0)
    throw UsageError("AOPC fractions must start at 0");
  for (std::size_t k = 0; k < fractions.size(); ++k)
    if (fractions[k] > 1.0 || (k > 0 && fractions[k] < fractions[k - 1]))
      throw UsageError("AOPC fractions must ascend within [0, 1]");

  const std::vector<NodeId> ranked = pruning_order(layout, omega, order, rng);
  const auto total = static_cast<double>(ranked.size());
  AopcCurve curve;
  curve.order = order;
  curve.snapshot = snapshot;
  curve.fractions.assign(fractions.begin(), fractions.end());
  for (const double f : fractions) {
    // ⌈f·|G|⌉, ignoring rounding noise just above an integer.
    const double exact = f * total;
    const double nearest = std::round(exact);
    const auto k = static_cast<std::size_t>(std::abs(exact - nearest) < 1e-9 ? nearest
                                                                              : std::ceil(exact));
    if (k == 0) {
      curve.accuracy.push_back(evaluate_mean_accuracy(params, sets));
      continue;
    }
    NodeValues pruned;
    for (std::size_t l = 0; l < layout.layer_count(); ++l)
      pruned.emplace_back(layout.nodes_in_layer(l), 0.0);
    for (std::size_t r = 0; r < k && r < ranked.size(); ++r)
      pruned[ranked[r].layer][ranked[r].index] = 1.0;
    curve.accuracy.push_back(evaluate_mean_accuracy(params, sets, &pruned));
  }
  return curve;
}

double aopc_area(const AopcCurve& curve) {
  double area = 0.0;
  const double base = curve.accuracy.front();
  for (std::size_t k = 1; k < curve.fractions.size(); ++k) {
    const double drop_a = base - curve.accuracy[k - 1];
    const double drop_b = base - curve.accuracy[k];
    area += 0.5 * (drop_a + drop_b) * (curve.fractions[k] - curve.fractions[k - 1]);
  }
  return area;
}

RegParamCount reg_param_count(const GroupLayout& layout) {
  return {layout.node_count(), layout.hidden_scalar_count()};
}

}  // namespace agscl
