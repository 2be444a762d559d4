#pragma once

#include "agscl/ags_optim.hpp"
#include "agscl/group_index.hpp"
#include "agscl/importance.hpp"
#include "agscl/nn.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace agscl {

/// Lower-triangular record of A_ij: accuracy on task j after training task i (0-based).
class AccuracyMatrix {
 public:
  AccuracyMatrix() = default;
  explicit AccuracyMatrix(std::size_t tasks);

  std::size_t tasks() const { return rows_.size(); }
  void record(std::size_t i, std::size_t j, double accuracy);
  /// Throws UsageError for j > i or entries not yet recorded.
  double at(std::size_t i, std::size_t j) const;
  bool has(std::size_t i, std::size_t j) const;
  /// Mean of row i over j ≤ i.
  double average(std::size_t i) const;
  /// Number of leading rows that are fully recorded.
  std::size_t complete_rows() const;

 private:
  std::vector<std::vector<double>> rows_;
};

/// A scalar metric plus its per-task terms; an undefined term (division by zero) is empty and
/// makes the aggregate empty too.
struct TaskRatio {
  std::optional<double> value;
  std::vector<std::optional<double>> per_task;
};

/// P = mean_i A_ii / A*_i over a complete matrix.
TaskRatio plasticity(const AccuracyMatrix& acc, std::span<const double> reference);
/// S = mean_j A_Tj / max_{j ≤ i ≤ T} A_ij over a complete matrix.
TaskRatio stability(const AccuracyMatrix& acc);

double sparsity(std::size_t g0_size, std::size_t total_nodes);

/// Fraction of nodes whose group equals its previous snapshot bitwise, or, given `tau`, whose
/// drift norm is below tau.
double used_capacity(const NetworkParams& params, const PrevParams& prev,
                     const GroupLayout& layout, std::optional<double> tau = std::nullopt);

/// Fraction of correct argmax predictions (ties resolve to the lowest class index).
double evaluate_accuracy(const NetworkParams& params, const Dataset& data, std::size_t task,
                         const NodeValues* pruned = nullptr, std::size_t batch_size = 1024);

/// One evaluation target for AOPC curves: a dataset read through a given head.
struct EvalSet {
  const Dataset* data = nullptr;
  std::size_t task = 0;
};

/// Mean accuracy over the given targets.
double evaluate_mean_accuracy(const NetworkParams& params, std::span<const EvalSet> sets,
                              const NodeValues* pruned = nullptr);

enum class AopcOrder { highest, lowest, random };

std::string to_string(AopcOrder order);
AopcOrder parse_aopc_order(const std::string& name);

struct AopcCurve {
  AopcOrder order = AopcOrder::highest;
  std::vector<double> fractions;
  std::vector<double> accuracy;
  std::size_t snapshot = 0;
};

/// Node order used for pruning: by Ω (ties by ascending NodeId) or a seeded shuffle.
std::vector<NodeId> pruning_order(const GroupLayout& layout, const OmegaRegistry& omega,
                                  AopcOrder order, Rng& rng);

/// Accuracy after silencing the first ⌈f·|G|⌉ nodes of the pruning order, for each fraction f.
/// `fractions` must ascend and start at 0. Parameters are never modified.
AopcCurve aopc_curve(const NetworkParams& params, const GroupLayout& layout,
                     const OmegaRegistry& omega, std::span<const EvalSet> sets, AopcOrder order,
                     std::span<const double> fractions, Rng& rng, std::size_t snapshot = 0);

/// Trapezoid area under the accuracy drop (accuracy at f = 0 minus accuracy at f).
double aopc_area(const AopcCurve& curve);

/// Number of Ω values stored (one per node) next to what a per-weight importance would need.
struct RegParamCount {
  std::size_t nodes = 0;
  std::size_t weights = 0;

  double ratio() const { return static_cast<double>(nodes) / static_cast<double>(weights); }
};

RegParamCount reg_param_count(const GroupLayout& layout);

}  // namespace agscl
