#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "patrec/rng.hpp"
#include "patrec/tensor.hpp"

// Central-difference gradient checker. The forward functor must rebuild the
// computation from its captured input tensors and return a scalar tensor;
// analytic gradients come from one taped backward pass, the reference from
// re-evaluating the forward at perturbed coordinates. Coordinates where both
// sides sit below the denominator floor are counted but cannot fail.

namespace patrec::testing {

struct GradCheckReport {
  double max_rel_err = 0.0;
  int checked = 0;
};

template <class S, class Forward>
GradCheckReport grad_check(Forward&& forward, std::vector<diff::Tensor<S>> inputs,
                           double step, int max_coords_per_tensor,
                           std::uint64_t seed, double denom_floor = 1e-10) {
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  std::vector<std::vector<double>> analytic;
  {
    diff::Graph<S> graph;
    diff::Tensor<S> out = forward();
    graph.backward(out);
  }
  for (auto& t : inputs) {
    std::vector<double> g(t.numel(), 0.0);
    if (t.has_grad())
      for (std::int64_t i = 0; i < t.numel(); ++i)
        g[i] = static_cast<double>(t.grad()[i]);
    analytic.push_back(std::move(g));
  }

  GradCheckReport report;
  Rng rng(seed);
  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    auto& t = inputs[ti];
    const std::int64_t n = t.numel();
    std::vector<std::int64_t> coords;
    if (n <= max_coords_per_tensor) {
      for (std::int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      for (int k = 0; k < max_coords_per_tensor; ++k)
        coords.push_back(static_cast<std::int64_t>(rng.below(n)));
    }
    for (std::int64_t idx : coords) {
      const S orig = t.value()[idx];
      const double h = step * std::max(1.0, std::abs(static_cast<double>(orig)));
      t.value()[idx] = static_cast<S>(static_cast<double>(orig) + h);
      const double fp = static_cast<double>(forward().item());
      t.value()[idx] = static_cast<S>(static_cast<double>(orig) - h);
      const double fm = static_cast<double>(forward().item());
      t.value()[idx] = orig;
      const double fd = (fp - fm) / (2.0 * h);
      const double a = analytic[ti][idx];
      const double denom = std::max({std::abs(a), std::abs(fd), denom_floor});
      report.max_rel_err = std::max(report.max_rel_err, std::abs(a - fd) / denom);
      ++report.checked;
    }
  }
  return report;
}

} // namespace patrec::testing
