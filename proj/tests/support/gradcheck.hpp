#pragma once

// Central finite-difference oracle for reverse-mode gradients.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "cbqg/rng.hpp"
#include "cbqg/tensor.hpp"

namespace cbqg::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t coords_checked = 0;
};

inline double rel_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// `loss_fn` must rebuild the whole graph from the leaves in `wrt` on every
/// call and be deterministic. At most `max_coords` coordinates (spread evenly)
/// are perturbed across all leaves.
inline GradCheckResult check_gradients(const std::function<Tensor()>& loss_fn, std::vector<Tensor> wrt,
                                       double h = 1e-5, std::size_t max_coords = 64) {
  Tape::active().clear();
  for (auto& t : wrt) t.zero_grad();
  backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  std::size_t total = 0;
  for (auto& t : wrt) {
    const auto g = t.grad();
    analytic.emplace_back(g.begin(), g.end());
    total += t.numel();
  }
  const std::size_t stride = std::max<std::size_t>(1, (total + max_coords - 1) / max_coords);
  GradCheckResult res;
  NoGradGuard no_grad;
  std::size_t flat = 0;
  for (std::size_t k = 0; k < wrt.size(); ++k) {
    auto vals = wrt[k].mutable_values();
    for (std::size_t i = 0; i < vals.size(); ++i, ++flat) {
      if (flat % stride != 0) continue;
      const double orig = vals[i];
      vals[i] = orig + h;
      const double up = loss_fn().item();
      vals[i] = orig - h;
      const double down = loss_fn().item();
      vals[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      res.max_rel_error = std::max(res.max_rel_error, rel_error(analytic[k][i], numeric));
      ++res.coords_checked;
    }
  }
  return res;
}

inline Tensor random_tensor(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0, bool requires_grad = true) {
  std::vector<double> v(numel_of(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

/// sum(t * w) for a fixed random weight tensor: gives every output element
/// a distinct upstream gradient.
inline Tensor weighted_sum(const Tensor& t, const Tensor& w) { return sum(mul(t, w)); }

}  // namespace cbqg::testing
