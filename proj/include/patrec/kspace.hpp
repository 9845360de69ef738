#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "patrec/field.hpp"

namespace patrec::kspace {

struct SimGrid {
  int m = 0;      // interior resolution
  int pad = 2;    // computational domain is pad times wider
  int M = 0;      // pad * m
  double h = 0;   // 2 / m, shared by interior and padded grid

  static SimGrid make(int m, int pad = 2);
  // offset of the interior block inside the padded grid (same on both axes)
  int interior_offset() const { return (M - m) / 2; }
};

// |k| on the M x M FFT grid; axis values are 2*pi*j/L for j = -M/2 .. M/2-1
// in FFT index order, with L = 2 * pad.
Field wavenumber_magnitudes(const SimGrid& grid);

struct SimConfig {
  double dt = 0;
  int n_steps = 0;
  int record_stride = 1;
  int n_det = 0;
  double cfl = 0.3;
  double c_max = 1.0;   // speed bound the dt choice was checked against
  double t_final = 0;   // n_steps * dt

  int n_recorded() const { return n_steps / record_stride; }

  // dt = cfl * h / c_max, record_stride the smallest integer giving
  // t_final >= t_min with exactly m recorded samples.
  static SimConfig make(const SimGrid& grid, double c_max, double cfl = 0.3,
                        double t_min = 2.5, int n_det = 0 /* 0 -> m */);
  void validate(const SimGrid& grid) const;
};

// Pseudospectral propagator for  d2p/dt2 = speed_sq * Lap p  with the
// spectral update  p_next = 2 p - p_prev - speed_sq .* Linv[p],
// Linv = F^-1 [ 4 sin^2(dt |k| / 2) ] F.  Exact for speed_sq == 1.
//
// Calls allocate their own FFT workspace, so const methods are reentrant and
// independent simulations may run concurrently.
class Simulator {
 public:
  Simulator(SimGrid grid, SimConfig cfg);

  const SimGrid& grid() const { return grid_; }
  const SimConfig& config() const { return cfg_; }

  // One leapfrog update.
  Field step(const Field& p_prev, const Field& p_curr, const Field& speed_sq) const;
  // p(dt) from p(0) = f and zero initial velocity:
  // p1 = p0 - 0.5 * speed_sq .* Linv[p0]. Even in the sign of dt.
  Field first_step(const Field& p0, const Field& speed_sq) const;

  // Forward tape: every state p_0 .. p_N, kept for the reverse pass.
  struct Recording {
    std::vector<Field> states;
    Field speed_sq;
  };

  // Time-steps n_steps times from the interior phantom f (embedded centrally,
  // zero elsewhere) and samples the n_det unit-circle detectors by bilinear
  // interpolation every record_stride steps. Returns n_det x n_recorded.
  Field simulate(const Field& f_interior, const Field& speed_sq,
                 Recording* recording = nullptr) const;

  // Exact vector-Jacobian product of simulate: reverse traversal of the
  // recorded steps. Returns (grad wrt interior f, grad wrt full speed field).
  std::pair<Field, Field> simulate_vjp(const Recording& recording,
                                       const Field& cotangent) const;

  // Directional derivative (tangent propagation); the other half of the
  // adjoint dot test.
  Field simulate_jvp(const Recording& recording, const Field& df_interior,
                     const Field& dspeed_sq) const;

  Field embed_interior(const Field& f, double fill = 0.0) const;
  Field extract_interior(const Field& full) const;

 private:
  struct Workspace;
  void apply_spectral(Workspace& ws, const Field& in, Field& out) const;
  void sample_detectors(const Field& p, double* row_out) const;

  SimGrid grid_;
  SimConfig cfg_;
  std::vector<double> symbol_;  // 4 sin^2(dt|k|/2) / M^2 on the r2c half grid

  struct DetectorStencil {
    int i0, j0, i1, j1;
    double w00, w01, w10, w11;
  };
  std::vector<DetectorStencil> detectors_;
};

} // namespace patrec::kspace
