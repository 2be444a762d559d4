#include "agscl/importance.hpp"

#include "agscl/errors.hpp"

#include <fmt/format.h>

#include <random>

namespace agscl {

OmegaRegistry::OmegaRegistry(const GroupLayout& layout, double eta) : eta_(eta) {
  if (!(eta > 0.0 && eta <= 1.0)) throw ConfigError(fmt::format("eta {} outside (0, 1]", eta));
  for (std::size_t l = 0; l < layout.layer_count(); ++l)
    values_.emplace_back(layout.nodes_in_layer(l), 0.0);
}

void OmegaRegistry::set(NodeId node, double value) {
  if (!(value >= 0.0)) throw DataError(fmt::format("omega must be >= 0, got {}", value));
  values_.at(node.layer).at(node.index) = value;
}

std::size_t OmegaRegistry::size() const {
  std::size_t n = 0;
  for (const auto& layer : values_) n += layer.size();
  return n;
}

std::size_t ZeroMask::release(NodeId upper) {
  const auto first = entries_.lower_bound(MaskKey{upper, 0});
  auto last = first;
  while (last != entries_.end() && last->first.upper == upper) ++last;
  const auto removed = static_cast<std::size_t>(std::distance(first, last));
  entries_.erase(first, last);
  return removed;
}

void ZeroMask::apply(std::vector<Matrix>& layers) const {
  for (const auto& [key, task] : entries_)
    layers[key.upper.layer](key.upper.index, key.column) = 0.0;
}

void update_omega(OmegaRegistry& omega, const NodeValues& activation_means) {
  const NodeValues& current = omega.values();
  if (activation_means.size() != current.size())
    throw DataError("activation means do not cover every layer");
  for (std::size_t l = 0; l < current.size(); ++l) {
    if (activation_means[l].size() != current[l].size())
      throw DataError(fmt::format("activation means for layer {} have wrong length", l));
    for (std::size_t n = 0; n < current[l].size(); ++n) {
      const double mean = activation_means[l][n];
      if (!(mean >= 0.0))
        throw DataError(fmt::format("negative mean activation {} at node ({}, {})", mean, l, n));
    }
  }
  for (std::size_t l = 0; l < current.size(); ++l)
    for (std::size_t n = 0; n < current[l].size(); ++n) {
      const NodeId id{static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(n)};
      omega.set(id, omega.eta() * current[l][n] + activation_means[l][n]);
    }
}

UnimportantSet derive_g0(const OmegaRegistry& omega) {
  UnimportantSet g0;
  const NodeValues& v = omega.values();
  for (std::size_t l = 0; l < v.size(); ++l)
    for (std::size_t n = 0; n < v[l].size(); ++n)
      if (v[l][n] == 0.0) g0.insert({static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(n)});
  return g0;
}

UnimportantSet derive_g0_below(const OmegaRegistry& omega, double tau) {
  if (!(tau > 0.0)) throw ConfigError(fmt::format("tau must be > 0, got {}", tau));
  UnimportantSet g0;
  const NodeValues& v = omega.values();
  for (std::size_t l = 0; l < v.size(); ++l)
    for (std::size_t n = 0; n < v[l].size(); ++n)
      if (v[l][n] < tau) g0.insert({static_cast<std::uint32_t>(l), static_cast<std::uint32_t>(n)});
  return g0;
}

void zero_init(NetworkParams& params, const GroupLayout& layout, const UnimportantSet& g0,
               ZeroMask& mask, std::uint32_t task) {
  for (const NodeId i : g0) {
    for (const OutgoingSlice& s : layout.outgoing(i)) {
      auto group = group_view(params, layout, s.upper);
      for (std::size_t c = s.begin; c < s.begin + s.length; ++c) {
        group[c] = 0.0;
        mask.add({s.upper, static_cast<std::uint32_t>(c)}, task);
      }
    }
  }
}

std::vector<NodeId> rand_init(NetworkParams& params, const GroupLayout& layout,
                              const UnimportantSet& g0, ZeroMask& mask, double rho, Rng& rng) {
  if (!(rho > 0.0 && rho <= 1.0)) throw ConfigError(fmt::format("rho {} outside (0, 1]", rho));
  std::vector<NodeId> redrawn;
  for (const NodeId n : g0) {
    std::bernoulli_distribution pick(rho);
    if (!pick(rng)) continue;
    draw_group(group_view(params, layout, n), layout.specs()[n.layer].fan_in, rng);
    mask.release(n);
    redrawn.push_back(n);
  }
  return redrawn;
}

void apply_mask(NetworkParams& params, const ZeroMask& mask) { mask.apply(params.layers); }

void zero_old_head_inputs(NetworkParams& params, const GroupLayout& layout,
                          const UnimportantSet& g0, std::size_t heads_through) {
  const std::size_t last = layout.layer_count() - 1;
  const std::size_t positions = layout.specs()[last].spatial();
  for (const NodeId i : g0) {
    if (i.layer != last) continue;
    for (std::size_t h = 0; h <= heads_through && h < params.heads.size(); ++h)
      params.heads[h]
          .middleCols(static_cast<Eigen::Index>(i.index * positions),
                      static_cast<Eigen::Index>(positions))
          .setZero();
  }
}

}  // namespace agscl
