#pragma once

// Randomised properties of the post-task bookkeeping. Each check builds its own fixture
// from `seed` and returns an empty string on success, or a description of the failure.

#include "fixtures.hpp"

#include "agscl/ags_optim.hpp"
#include "agscl/importance.hpp"

#include <fmt/format.h>

#include <string>

namespace properties {

using namespace agscl;

struct Fixture {
  NetworkParams params;
  GroupLayout layout;
  OmegaRegistry omega;
  Rng rng;
};

inline Fixture make_fixture(std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> width(2, 7);
  std::vector<LayerSpec> specs;
  if (seed % 4 == 0) {
    specs = fixtures::conv2_specs();
  } else {
    std::size_t in = width(rng);
    const std::size_t depth = 2 + seed % 2;
    for (std::size_t l = 0; l < depth; ++l) {
      const std::size_t out = width(rng);
      specs.push_back(LayerSpec::dense(in, out));
      in = out;
    }
  }
  Fixture f{init_network(specs, std::vector<std::size_t>{2, 3}, rng), GroupLayout(specs), {}, {}};
  f.omega = OmegaRegistry(f.layout);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const NodeId n : f.layout.nodes())
    if (u(rng) < 0.5) f.omega.set(n, u(rng));
  f.rng = Rng(seed ^ 0x9e3779b97f4a7c15ULL);
  return f;
}

// Masked entries whose upper node is never redrawn stay exactly zero through later
// training (Adam steps with arbitrary gradients, prox sweeps) and later re-inits.
inline std::string mask_survival(std::uint64_t seed) {
  Fixture f = make_fixture(seed);
  ZeroMask mask;
  const auto g0 = derive_g0(f.omega);
  zero_init(f.params, f.layout, g0, mask, 0);
  std::set<NodeId> redrawn;
  for (const NodeId n : rand_init(f.params, f.layout, g0, mask, 0.5, f.rng)) redrawn.insert(n);
  const ZeroMask original = mask;

  Hyperparams hp;
  hp.mu = 5.0;
  auto adam = AdamState::fresh(f.params);
  const auto prev = PrevParams::snapshot(f.params);
  std::normal_distribution<double> g(0.0, 1.0);
  for (std::size_t task = 1; task <= 2; ++task) {
    for (int step = 0; step < 3; ++step) {
      auto grads = GradientSet::zeros_like(f.params);
      for (auto& m : grads.layers)
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = g(f.rng);
      gradient_step(f.params, grads, adam, 0.05, task - 1, mask);
      prox_sweep(f.params, f.layout, f.omega, prev, hp, 0.05);
      apply_mask(f.params, mask);
    }
    // Later re-inits only touch nodes in a new G0, which is a subset of the old one.
    UnimportantSet later;
    for (const NodeId n : g0)
      if (std::bernoulli_distribution(0.3)(f.rng)) later.insert(n);
    zero_init(f.params, f.layout, later, mask, static_cast<std::uint32_t>(task));
    for (const NodeId n : rand_init(f.params, f.layout, later, mask, 0.5, f.rng)) redrawn.insert(n);
  }
  for (const auto& [key, task] : original.entries()) {
    if (redrawn.contains(key.upper)) continue;
    if (!mask.contains(key))
      return fmt::format("entry ({},{}):{} vanished", key.upper.layer, key.upper.index, key.column);
    const double w = group_view(f.params, f.layout, key.upper)[key.column];
    if (w != 0.0)
      return fmt::format("entry ({},{}):{} holds {}", key.upper.layer, key.upper.index,
                         key.column, w);
  }
  return {};
}

// A node masked into every upper node cannot influence any upper activation or logit.
inline std::string nullified_transfer(std::uint64_t seed) {
  Fixture f = make_fixture(seed);
  std::vector<NodeId> candidates;
  for (const NodeId n : f.layout.nodes())
    if (n.layer + 1 < f.layout.layer_count()) candidates.push_back(n);
  const NodeId i = candidates[f.rng() % candidates.size()];
  ZeroMask mask;
  zero_init(f.params, f.layout, UnimportantSet{i}, mask, 0);

  const Matrix x = fixtures::random_matrix(4, f.params.input_width(), f.rng);
  const auto before = forward(f.params, x, 1);
  auto g = group_view(f.params, f.layout, i);
  std::normal_distribution<double> big(0.0, 100.0);
  for (auto& w : g) w = big(f.rng);
  const auto after = forward(f.params, x, 1);
  for (std::size_t l = i.layer + 1; l < after.activations.size(); ++l)
    if (after.activations[l] != before.activations[l])
      return fmt::format("layer {} changed after perturbing ({},{})", l, i.layer, i.index);
  if (after.logits != before.logits) return "logits changed";
  return {};
}

// Once Ω > 0 it stays > 0 under further updates with non-negative means; |G0| never grows.
inline std::string omega_persistence(std::uint64_t seed) {
  Fixture f = make_fixture(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t last = derive_g0(f.omega).size();
  for (int t = 0; t < 6; ++t) {
    const auto positive_before = f.omega.values();
    NodeValues means = f.omega.values();
    for (auto& layer : means)
      for (auto& m : layer) m = u(f.rng) < 0.6 ? 0.0 : u(f.rng);
    update_omega(f.omega, means);
    for (std::size_t l = 0; l < means.size(); ++l)
      for (std::size_t n = 0; n < means[l].size(); ++n)
        if (positive_before[l][n] > 0.0 && !(f.omega.values()[l][n] > 0.0))
          return fmt::format("omega of ({},{}) returned to zero", l, n);
    const std::size_t now = derive_g0(f.omega).size();
    if (now > last) return fmt::format("G0 grew from {} to {}", last, now);
    last = now;
  }
  return {};
}

// Running rand-init before zero-init gives a different network than the mandated order
// whenever a redrawn node reads from another unimportant node.
inline std::string init_order_matters(std::uint64_t seed) {
  Fixture f = make_fixture(seed);
  // Make the first node of the first two layers unimportant so the crafted case always exists.
  f.omega.set({0, 0}, 0.0);
  f.omega.set({1, 0}, 0.0);
  const auto g0 = derive_g0(f.omega);
  const std::uint64_t draw_seed = f.rng();

  NetworkParams mandated = f.params;
  ZeroMask mask_a;
  Rng ra(draw_seed);
  zero_init(mandated, f.layout, g0, mask_a, 0);
  rand_init(mandated, f.layout, g0, mask_a, 1.0, ra);

  NetworkParams swapped = f.params;
  ZeroMask mask_b;
  Rng rb(draw_seed);
  rand_init(swapped, f.layout, g0, mask_b, 1.0, rb);
  zero_init(swapped, f.layout, g0, mask_b, 0);

  bool differs = false;
  for (std::size_t l = 0; l < mandated.layers.size(); ++l)
    differs = differs || mandated.layers[l] != swapped.layers[l];
  if (!differs) return "swapping the init order changed nothing";
  // In the mandated order a redrawn node's incoming weights are live and unmasked.
  const auto slice = f.layout.outgoing({0, 0});
  for (const auto& s : slice)
    if (s.upper == NodeId{1, 0})
      for (std::size_t c = s.begin; c < s.begin + s.length; ++c)
        if (mask_a.contains({s.upper, static_cast<std::uint32_t>(c)}))
          return "redrawn node kept a mask entry";
  return {};
}

}  // namespace properties
