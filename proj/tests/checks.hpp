#pragma once

// Checks shared by the unit suites and the acceptance binary.

#include "fixtures.hpp"
#include "prox_oracle.hpp"

#include "agscl/ags_optim.hpp"
#include "agscl/importance.hpp"

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

namespace checks {

using namespace agscl;

inline std::vector<double> random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return std::sqrt(s);
}

inline std::vector<double> scaled_to_norm(std::vector<double> v, double norm) {
  const double s = norm / l2_norm(v);
  for (auto& x : v) x *= s;
  return v;
}

// Central differences over every hidden and active-head parameter; returns the worst
// relative error max|a - n| / max(1e-6, |a| + |n|).
inline double worst_relative_error(NetworkParams params, const Matrix& x, const std::vector<int>& y,
                                   std::size_t task) {
  const auto grads = task_loss_and_grad(params, x, y, task).second;
  const double h = 1e-6;
  double worst = 0.0;
  auto check = [&](Matrix& m, const Matrix& g) {
    for (Eigen::Index k = 0; k < m.size(); ++k) {
      const double keep = m.data()[k];
      m.data()[k] = keep + h;
      const double up = task_loss(params, x, y, task);
      m.data()[k] = keep - h;
      const double down = task_loss(params, x, y, task);
      m.data()[k] = keep;
      const double numeric = (up - down) / (2 * h);
      const double analytic = g.data()[k];
      const double denom = std::max(1e-6, std::abs(analytic) + std::abs(numeric));
      worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
  };
  for (std::size_t l = 0; l < params.layers.size(); ++l) check(params.layers[l], grads.layers[l]);
  check(params.heads[task], grads.heads[task]);
  return worst;
}

// Worst distance between the closed forms and the brute-force minimiser over random
// instances: dims 1..50, c in (0, 5], alpha in (0, 1].
inline double worst_prox_error(std::uint64_t seed, int trials) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> dim(1, 50);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const std::size_t n = dim(rng);
    const double c = 5.0 * (1.0 - unit(rng));
    const double alpha = 1.0 - unit(rng);
    const auto v = random_vector(n, rng, unit(rng) < 0.5 ? 0.3 : 2.0);
    const auto anchor = random_vector(n, rng);
    const std::vector<double> zero(n, 0.0);
    worst = std::max(worst, distance(prox_group_lasso(v, alpha * c),
                                     fixtures::brute_force_prox(v, zero, c, alpha)));
    worst = std::max(worst, distance(prox_group_freeze(v, anchor, alpha * c),
                                     fixtures::brute_force_prox(v, anchor, c, alpha)));
  }
  return worst;
}

struct SweepOutcome {
  std::size_t zeroed = 0;      ///< groups inside the lasso threshold
  std::size_t frozen = 0;      ///< groups inside the freeze threshold
  std::size_t violations = 0;  ///< groups that broke exactness or failed to shrink
  bool counts_match = false;   ///< prox_sweep's own tallies agree
};

// A random network whose groups sit on both sides of their thresholds, swept once.
inline SweepOutcome sweep_exactness(std::uint64_t seed) {
  auto p = fixtures::network(fixtures::mlp_specs(20, 15, 10), {2}, seed);
  const auto layout = build_layout(p.specs);
  OmegaRegistry omega(layout);
  Rng rng(seed + 1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const NodeId n : layout.nodes())
    if (u(rng) < 0.5) omega.set(n, u(rng));
  const PrevParams prev = PrevParams::snapshot(p);
  Hyperparams hp;
  hp.mu = 50.0;
  hp.lambda = 100.0;
  const double lr = 1e-2;
  for (const NodeId n : layout.nodes()) {
    auto g = group_view(p, layout, n);
    const auto anchor = group_view(prev.layers, layout, n);
    const double target = omega[n] == 0.0 ? 2.0 * u(rng) * lr * hp.mu
                                          : 2.0 * u(rng) * lr * hp.lambda * omega[n];
    std::vector<double> dir(g.size());
    for (auto& x : dir) x = u(rng) - 0.5;
    dir = scaled_to_norm(dir, target);
    for (std::size_t k = 0; k < g.size(); ++k) g[k] = omega[n] == 0.0 ? dir[k] : anchor[k] + dir[k];
  }
  const NetworkParams before = p;
  const auto counts = prox_sweep(p, layout, omega, prev, hp, lr);
  SweepOutcome out;
  for (const NodeId n : layout.nodes()) {
    const auto was = group_view(before, layout, n);
    const auto now = group_view(p, layout, n);
    const auto anchor = group_view(prev.layers, layout, n);
    bool ok = true;
    if (omega[n] == 0.0) {
      if (l2_norm(was) <= lr * hp.mu) {
        ++out.zeroed;
        ok = std::all_of(now.begin(), now.end(), [](double x) { return x == 0.0; });
      } else {
        ok = l2_norm(now) < l2_norm(was);
      }
    } else if (distance(was, anchor) <= lr * hp.lambda * omega[n]) {
      ++out.frozen;
      ok = std::equal(now.begin(), now.end(), anchor.begin());
    } else {
      ok = distance(now, anchor) < distance(was, anchor);
    }
    if (!ok) ++out.violations;
  }
  out.counts_match = counts.zeroed == out.zeroed && counts.frozen == out.frozen;
  return out;
}

}  // namespace checks
