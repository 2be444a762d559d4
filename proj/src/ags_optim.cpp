#include "agscl/ags_optim.hpp"

#include "agscl/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace agscl {

void Hyperparams::validate() const {
  const auto require = [](bool ok, const std::string& what) {
    if (!ok) throw ConfigError(what);
  };
  require(mu >= 0.0, fmt::format("mu must be >= 0, got {}", mu));
  require(lambda >= 0.0, fmt::format("lambda must be >= 0, got {}", lambda));
  require(rho > 0.0 && rho <= 1.0, fmt::format("rho {} outside (0, 1]", rho));
  require(eta > 0.0 && eta <= 1.0, fmt::format("eta {} outside (0, 1]", eta));
  require(lr > 0.0 && std::isfinite(lr), fmt::format("lr must be > 0, got {}", lr));
  require(epochs >= 1, "epochs must be >= 1");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(plateau.patience >= 1, "plateau patience must be >= 1");
  require(plateau.factor > 1.0, fmt::format("plateau factor must be > 1, got {}", plateau.factor));
  require(plateau.lr_min >= 0.0 && plateau.lr_min <= lr, "lr_min must lie in [0, lr]");
}

PlateauScheduler::PlateauScheduler(double lr, PlateauSettings settings)
    : lr_(lr), settings_(settings), best_(std::numeric_limits<double>::infinity()) {}

double PlateauScheduler::step(double val_loss) {
  if (!std::isfinite(val_loss))
    throw NumericError(fmt::format("non-finite validation loss {}", val_loss));
  if (val_loss < best_) {
    best_ = val_loss;
    bad_epochs_ = 0;
  } else if (++bad_epochs_ >= settings_.patience) {
    lr_ = std::max(lr_ / settings_.factor, settings_.lr_min);
    bad_epochs_ = 0;
  }
  return lr_;
}

void PlateauScheduler::reset(double lr) {
  lr_ = lr;
  best_ = std::numeric_limits<double>::infinity();
  bad_epochs_ = 0;
}

AdamState AdamState::fresh(const NetworkParams& params) {
  AdamState s;
  s.first = GradientSet::zeros_like(params);
  s.second = GradientSet::zeros_like(params);
  return s;
}

namespace {

void adam_update(Matrix& p, const Matrix& g, Matrix& m, Matrix& v, double lr, double b1,
                 double b2, double eps, double bc1, double bc2) {
  m.array() = b1 * m.array() + (1.0 - b1) * g.array();
  v.array() = b2 * v.array() + (1.0 - b2) * g.array().square();
  p.array() -= lr * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps);
}

void check_threshold(double threshold) {
  if (!(threshold >= 0.0))
    throw ConfigError(fmt::format("prox threshold must be >= 0, got {}", threshold));
}

double drift_norm(std::span<const double> v, std::span<const double> anchor) {
  double sum = 0.0;
  for (std::size_t k = 0; k < v.size(); ++k) {
    const double d = v[k] - anchor[k];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace

void gradient_step(NetworkParams& params, GradientSet& grads, AdamState& adam, double lr,
                   std::size_t task, const ZeroMask& mask) {
  if (task >= params.heads.size()) throw LookupError(fmt::format("no head for task {}", task));
  if (!grads.all_finite()) throw NumericError("non-finite gradient; step aborted");
  mask.apply(grads.layers);

  adam.step += 1;
  const auto t = static_cast<double>(adam.step);
  const double bc1 = 1.0 - std::pow(adam.beta1, t);
  const double bc2 = 1.0 - std::pow(adam.beta2, t);
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    adam_update(params.layers[l], grads.layers[l], adam.first.layers[l], adam.second.layers[l], lr,
                adam.beta1, adam.beta2, adam.eps, bc1, bc2);
  adam_update(params.heads[task], grads.heads[task], adam.first.heads[task],
              adam.second.heads[task], lr, adam.beta1, adam.beta2, adam.eps, bc1, bc2);
  apply_mask(params, mask);
}

void prox_group_lasso_inplace(std::span<double> v, double threshold) {
  check_threshold(threshold);
  if (threshold == 0.0) return;
  const double norm = l2_norm(v);
  if (norm <= threshold) {
    std::fill(v.begin(), v.end(), 0.0);
    return;
  }
  const double scale = 1.0 - threshold / norm;
  for (double& x : v) x *= scale;
}

void prox_group_freeze_inplace(std::span<double> v, std::span<const double> anchor,
                               double threshold) {
  check_threshold(threshold);
  if (v.size() != anchor.size())
    throw UsageError(fmt::format("group of {} values vs anchor of {}", v.size(), anchor.size()));
  if (threshold == 0.0) return;
  const double drift = drift_norm(v, anchor);
  if (drift <= threshold) {
    std::copy(anchor.begin(), anchor.end(), v.begin());
    return;
  }
  const double gamma = 1.0 - threshold / drift;
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = gamma * v[k] + (1.0 - gamma) * anchor[k];
}

std::vector<double> prox_group_lasso(std::span<const double> v, double threshold) {
  std::vector<double> out(v.begin(), v.end());
  prox_group_lasso_inplace(out, threshold);
  return out;
}

std::vector<double> prox_group_freeze(std::span<const double> v, std::span<const double> anchor,
                                      double threshold) {
  std::vector<double> out(v.begin(), v.end());
  prox_group_freeze_inplace(out, anchor, threshold);
  return out;
}

SweepCounts prox_sweep(NetworkParams& params, const GroupLayout& layout,
                       const OmegaRegistry& omega, const PrevParams& prev, const Hyperparams& hp,
                       double lr) {
  SweepCounts counts;
  for (const NodeId node : layout.nodes()) {
    auto group = group_view(params, layout, node);
    const double importance = omega[node];
    if (importance == 0.0) {
      prox_group_lasso_inplace(group, lr * hp.mu);
      if (std::all_of(group.begin(), group.end(), [](double x) { return x == 0.0; }))
        ++counts.zeroed;
      else
        ++counts.moved;
    } else {
      const auto anchor = group_view(prev.layers, layout, node);
      prox_group_freeze_inplace(group, anchor, lr * hp.lambda * importance);
      if (std::equal(group.begin(), group.end(), anchor.begin()))
        ++counts.frozen;
      else
        ++counts.moved;
    }
  }
  return counts;
}

double regularizer_value(const NetworkParams& params, const GroupLayout& layout,
                         const OmegaRegistry& omega, const PrevParams& prev,
                         const Hyperparams& hp, const UnimportantSet& g0) {
  double sparse = 0.0, drift = 0.0;
  for (const NodeId node : layout.nodes()) {
    const auto group = group_view(params, layout, node);
    if (g0.contains(node))
      sparse += l2_norm(group);
    else
      drift += omega[node] * drift_norm(group, group_view(prev.layers, layout, node));
  }
  return hp.mu * sparse + hp.lambda * drift;
}

void add_regularizer_subgradient(GradientSet& grads, const NetworkParams& params,
                                 const GroupLayout& layout, const OmegaRegistry& omega,
                                 const PrevParams& prev, const Hyperparams& hp,
                                 const UnimportantSet& g0) {
  for (const NodeId node : layout.nodes()) {
    const auto group = group_view(params, layout, node);
    auto grad = group_view(grads.layers, layout, node);
    if (g0.contains(node)) {
      const double norm = l2_norm(group);
      if (norm == 0.0 || hp.mu == 0.0) continue;
      for (std::size_t k = 0; k < group.size(); ++k) grad[k] += hp.mu * group[k] / norm;
    } else {
      const auto anchor = group_view(prev.layers, layout, node);
      const double norm = drift_norm(group, anchor);
      const double weight = hp.lambda * omega[node];
      if (norm == 0.0 || weight == 0.0) continue;
      for (std::size_t k = 0; k < group.size(); ++k)
        grad[k] += weight * (group[k] - anchor[k]) / norm;
    }
  }
}

std::vector<EpochLog> train_task(NetworkParams& params, const Task& task, std::size_t task_id,
                                 const GroupLayout& layout, const OmegaRegistry& omega,
                                 const PrevParams& prev, const Hyperparams& hp, AdamState& adam,
                                 PlateauScheduler& scheduler, Rng& batch_rng,
                                 const ZeroMask& mask, const TrainOptions& options) {
  const Dataset& train = task.train;
  if (train.size() == 0) throw DataError(fmt::format("task {} has no training data", task_id));
  UnimportantSet thresholded;
  if (options.mode == TrainMode::no_pgd) thresholded = derive_g0_below(omega, options.tau);

  std::vector<std::size_t> order(train.size());
  std::vector<EpochLog> log;
  const auto prox_lr = [&] { return hp.prox_uses_current_lr ? scheduler.lr() : hp.lr; };

  for (std::size_t epoch = 0; epoch < hp.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), batch_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += hp.batch_size) {
      const std::size_t count = std::min(hp.batch_size, order.size() - begin);
      Matrix x(static_cast<Eigen::Index>(count), train.inputs.cols());
      std::vector<int> y(count);
      for (std::size_t r = 0; r < count; ++r) {
        x.row(static_cast<Eigen::Index>(r)) =
            train.inputs.row(static_cast<Eigen::Index>(order[begin + r]));
        y[r] = train.labels[order[begin + r]];
      }
      auto [loss, grads] = task_loss_and_grad(params, x, y, task_id);
      if (options.mode == TrainMode::no_pgd)
        add_regularizer_subgradient(grads, params, layout, omega, prev, hp, thresholded);
      gradient_step(params, grads, adam, scheduler.lr(), task_id, mask);
      if (options.mode == TrainMode::pgd && hp.prox_per_minibatch) {
        prox_sweep(params, layout, omega, prev, hp, prox_lr());
        apply_mask(params, mask);
      }
      loss_sum += loss;
      ++batches;
    }
    if (options.mode == TrainMode::pgd && !hp.prox_per_minibatch) {
      prox_sweep(params, layout, omega, prev, hp, prox_lr());
      apply_mask(params, mask);
    }
    EpochLog entry;
    entry.train_loss = loss_sum / static_cast<double>(batches);
    entry.val_loss = task.val.size() > 0
                         ? task_loss(params, task.val.inputs, task.val.labels, task_id)
                         : entry.train_loss;
    entry.lr = scheduler.lr();
    scheduler.step(entry.val_loss);
    log.push_back(entry);
  }
  return log;
}

}  // namespace agscl
