#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "patrec/tensor.hpp"

namespace patrec::diff {

// Bias-corrected Adam over parameter groups with independent learning rates.
// Moments live here, keyed by group/parameter position; the step counter is
// shared so all groups see the same bias correction.
template <class S>
class Adam {
 public:
  struct Hyper {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  void add_group(std::vector<Tensor<S>> params, double lr) {
    Group g;
    g.hp.lr = lr;
    g.params = std::move(params);
    for (auto& p : g.params) {
      g.m.emplace_back(p.numel(), S(0));
      g.v.emplace_back(p.numel(), S(0));
    }
    groups_.push_back(std::move(g));
  }

  std::int64_t step_count() const { return t_; }

  void zero_grad() {
    for (auto& g : groups_)
      for (auto& p : g.params) p.zero_grad();
  }

  void step() {
    ++t_;
    for (auto& g : groups_) {
      const double bc1 = 1.0 - std::pow(g.hp.beta1, static_cast<double>(t_));
      const double bc2 = 1.0 - std::pow(g.hp.beta2, static_cast<double>(t_));
      for (std::size_t pi = 0; pi < g.params.size(); ++pi) {
        auto& p = g.params[pi];
        if (!p.has_grad()) continue;  // no gradient reached this parameter
        auto pv = p.value();
        auto gv = p.grad();
        auto& m = g.m[pi];
        auto& v = g.v[pi];
        for (std::size_t i = 0; i < m.size(); ++i) {
          const double grad = static_cast<double>(gv[i]);
          const double mi = g.hp.beta1 * static_cast<double>(m[i]) +
                            (1.0 - g.hp.beta1) * grad;
          const double vi = g.hp.beta2 * static_cast<double>(v[i]) +
                            (1.0 - g.hp.beta2) * grad * grad;
          m[i] = static_cast<S>(mi);
          v[i] = static_cast<S>(vi);
          const double update =
              g.hp.lr * (mi / bc1) / (std::sqrt(vi / bc2) + g.hp.eps);
          pv[i] = static_cast<S>(static_cast<double>(pv[i]) - update);
        }
      }
    }
  }

 private:
  struct Group {
    std::vector<Tensor<S>> params;
    Hyper hp;
    std::vector<std::vector<S>> m, v;
  };
  std::vector<Group> groups_;
  std::int64_t t_ = 0;
};

} // namespace patrec::diff
