#pragma once

#include <memory>

#include "patrec/kspace.hpp"
#include "patrec/tensor.hpp"

namespace patrec::diff {

// The forward wave operator as a graph primitive. The forward pass runs in
// double precision and retains the state tape; the backward closure feeds the
// boundary cotangent through simulate_vjp and accumulates into both inputs.
// The simulator must outlive the graph that recorded the op.
template <class S>
Tensor<S> simulate_op(const kspace::Simulator& sim, const Tensor<S>& f_interior,
                      const Tensor<S>& speed_sq) {
  const auto& grid = sim.grid();
  if (f_interior.ndim() != 2 || f_interior.dim(0) != grid.m || f_interior.dim(1) != grid.m)
    throw std::invalid_argument("simulate_op: phantom estimate must be m x m");
  if (speed_sq.ndim() != 2 || speed_sq.dim(0) != grid.M || speed_sq.dim(1) != grid.M)
    throw std::invalid_argument("simulate_op: speed field must be M x M");

  Field f(grid.m, grid.m);
  for (std::size_t i = 0; i < f.v.size(); ++i)
    f.v[i] = static_cast<double>(f_interior.value()[i]);
  Field c2(grid.M, grid.M);
  for (std::size_t i = 0; i < c2.v.size(); ++i)
    c2.v[i] = static_cast<double>(speed_sq.value()[i]);

  const bool track = detail::should_track<S>(f_interior, speed_sq);
  auto recording = track ? std::make_shared<kspace::Simulator::Recording>() : nullptr;
  Field boundary = sim.simulate(f, c2, recording.get());

  Tensor<S> out = Tensor<S>::zeros({boundary.rows, boundary.cols});
  for (std::size_t i = 0; i < boundary.v.size(); ++i)
    out.value()[i] = static_cast<S>(boundary.v[i]);

  if (track) {
    out.set_requires_grad(true);
    const kspace::Simulator* simp = &sim;
    Graph<S>::active()->record([simp, recording, f_interior, speed_sq, out]() {
      if (!out.has_grad()) return;
      Field cot(out.dim(0), out.dim(1));
      for (std::size_t i = 0; i < cot.v.size(); ++i)
        cot.v[i] = static_cast<double>(out.grad()[i]);
      auto [gf, gc] = simp->simulate_vjp(*recording, cot);
      if (f_interior.requires_grad()) {
        auto fg = f_interior.grad();
        for (std::size_t i = 0; i < gf.v.size(); ++i)
          fg[i] += static_cast<S>(gf.v[i]);
      }
      if (speed_sq.requires_grad()) {
        auto cg = speed_sq.grad();
        for (std::size_t i = 0; i < gc.v.size(); ++i)
          cg[i] += static_cast<S>(gc.v[i]);
      }
    });
  }
  return out;
}

} // namespace patrec::diff
