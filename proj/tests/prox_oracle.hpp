#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace fixtures {

// Brute-force minimiser of  c·‖θ − θ₀‖ + ‖θ − v‖² / (2α)  restricted to the segment
// θ = θ₀ + γ(v − θ₀), γ ∈ [0, 1]. The objective is convex in γ, so a ternary search
// followed by a comparison against both end points finds the minimum.
inline std::vector<double> brute_force_prox(std::span<const double> v, std::span<const double> anchor,
                                            double c, double alpha) {
  const std::size_t n = v.size();
  auto point = [&](double g) {
    std::vector<double> t(n);
    for (std::size_t k = 0; k < n; ++k) t[k] = anchor[k] + g * (v[k] - anchor[k]);
    return t;
  };
  auto objective = [&](double g) {
    const auto t = point(g);
    double drift = 0.0, fit = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      drift += (t[k] - anchor[k]) * (t[k] - anchor[k]);
      fit += (t[k] - v[k]) * (t[k] - v[k]);
    }
    return c * std::sqrt(drift) + fit / (2.0 * alpha);
  };
  double lo = 0.0, hi = 1.0;
  for (int it = 0; it < 200; ++it) {
    const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
    if (objective(a) <= objective(b))
      hi = b;
    else
      lo = a;
  }
  double best = 0.5 * (lo + hi);
  for (const double g : {0.0, 1.0})
    if (objective(g) < objective(best)) best = g;
  return point(best);
}

}  // namespace fixtures
