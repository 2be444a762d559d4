#pragma once

#include "agscl/group_index.hpp"
#include "agscl/importance.hpp"
#include "agscl/nn.hpp"
#include "agscl/tasks.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace agscl {

/// Reduce-on-plateau settings: divide the learning rate by `factor` after `patience`
/// consecutive epochs without a validation-loss improvement, never going below `lr_min`.
struct PlateauSettings {
  std::size_t patience = 5;
  double factor = 3.0;
  double lr_min = 1e-6;
};

struct Hyperparams {
  double mu = 10.0;       ///< group-Lasso weight on unimportant nodes
  double lambda = 400.0;  ///< drift-penalty weight on important nodes
  double rho = 0.3;       ///< probability of redrawing an unimportant node after a task
  double eta = 0.9;       ///< Ω decay
  double lr = 1e-3;       ///< initial learning rate α
  std::size_t epochs = 20;
  std::size_t batch_size = 256;
  PlateauSettings plateau{};
  /// When false the prox threshold uses the initial lr instead of the decayed one.
  bool prox_uses_current_lr = true;
  /// Apply the proximal sweep after every minibatch instead of once per epoch.
  bool prox_per_minibatch = false;

  /// Throws ConfigError when a bound is violated.
  void validate() const;
};

class PlateauScheduler {
 public:
  PlateauScheduler(double lr, PlateauSettings settings);

  double lr() const { return lr_; }
  /// Feeds one epoch's validation loss and returns the (possibly decayed) learning rate.
  double step(double val_loss);
  void reset(double lr);

 private:
  double lr_;
  PlateauSettings settings_;
  double best_;
  std::size_t bad_epochs_ = 0;
};

/// Adam moments, shape-congruent with the network.
struct AdamState {
  GradientSet first;
  GradientSet second;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState fresh(const NetworkParams& params);
};

/// θ̂ of the hidden layers at the end of the previous task; the freeze anchor.
struct PrevParams {
  std::vector<Matrix> layers;

  static PrevParams snapshot(const NetworkParams& params) { return {params.layers}; }
};

/// One bias-corrected Adam step over the hidden layers and head `task`. Gradients of masked
/// coordinates are zeroed before the moments see them. Throws NumericError on non-finite
/// gradients, leaving params and moments untouched.
void gradient_step(NetworkParams& params, GradientSet& grads, AdamState& adam, double lr,
                   std::size_t task, const ZeroMask& mask);

/// (1 - threshold/‖v‖)₊ · v. Exactly the zero vector when ‖v‖ ≤ threshold.
std::vector<double> prox_group_lasso(std::span<const double> v, double threshold);

/// γ·v + (1-γ)·anchor with γ = (1 - threshold/‖v - anchor‖)₊. Exactly `anchor` when the
/// drift is at most threshold.
std::vector<double> prox_group_freeze(std::span<const double> v, std::span<const double> anchor,
                                      double threshold);

void prox_group_lasso_inplace(std::span<double> v, double threshold);
void prox_group_freeze_inplace(std::span<double> v, std::span<const double> anchor,
                               double threshold);

struct SweepCounts {
  std::size_t zeroed = 0;
  std::size_t frozen = 0;
  std::size_t moved = 0;
};

/// Closed-form prox of the combined penalty, node by node: group Lasso with lr·μ for nodes
/// with Ω = 0, drift shrinkage toward the anchor with lr·λ·Ω otherwise. Heads are not touched.
SweepCounts prox_sweep(NetworkParams& params, const GroupLayout& layout,
                       const OmegaRegistry& omega, const PrevParams& prev, const Hyperparams& hp,
                       double lr);

/// Value of both penalty terms for a given unimportant set.
double regularizer_value(const NetworkParams& params, const GroupLayout& layout,
                         const OmegaRegistry& omega, const PrevParams& prev,
                         const Hyperparams& hp, const UnimportantSet& g0);

/// Adds the minimum-norm subgradient of both penalty terms to `grads` (no-prox training).
void add_regularizer_subgradient(GradientSet& grads, const NetworkParams& params,
                                 const GroupLayout& layout, const OmegaRegistry& omega,
                                 const PrevParams& prev, const Hyperparams& hp,
                                 const UnimportantSet& g0);

enum class TrainMode {
  pgd,     ///< Adam on the task loss, then the closed-form prox
  no_pgd,  ///< Adam on task loss plus penalty subgradients; G₀ by Ω < tau
  plain,   ///< Adam on the task loss only (fine-tuning)
};

struct TrainOptions {
  TrainMode mode = TrainMode::pgd;
  double tau = 1e-4;
};

struct EpochLog {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

/// K epochs on one task. Each epoch shuffles the training set with `batch_rng`, takes one Adam
/// step per minibatch, then (pgd mode) applies one prox sweep at the scheduler's lr, then feeds
/// the validation loss to the scheduler.
std::vector<EpochLog> train_task(NetworkParams& params, const Task& task, std::size_t task_id,
                                 const GroupLayout& layout, const OmegaRegistry& omega,
                                 const PrevParams& prev, const Hyperparams& hp, AdamState& adam,
                                 PlateauScheduler& scheduler, Rng& batch_rng,
                                 const ZeroMask& mask, const TrainOptions& options = {});

}  // namespace agscl
