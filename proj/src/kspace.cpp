#include "patrec/kspace.hpp"

#include <fftw3.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace patrec::kspace {

namespace {

double axis_wavenumber(int j, int M, double L) {
  const int js = j < M / 2 ? j : j - M;
  return 2.0 * std::numbers::pi * js / L;
}

} // namespace

SimGrid SimGrid::make(int m, int pad) {
  if (m < 4 || m % 2 != 0) throw std::invalid_argument("SimGrid: m must be even and >= 4");
  if (pad < 1) throw std::invalid_argument("SimGrid: pad must be >= 1");
  SimGrid g;
  g.m = m;
  g.pad = pad;
  g.M = pad * m;
  g.h = 2.0 / m;
  return g;
}

Field wavenumber_magnitudes(const SimGrid& grid) {
  const int M = grid.M;
  const double L = 2.0 * grid.pad;
  Field k(M, M);
  for (int i = 0; i < M; ++i) {
    const double ky = axis_wavenumber(i, M, L);
    for (int j = 0; j < M; ++j) {
      const double kx = axis_wavenumber(j, M, L);
      k.at(i, j) = std::hypot(kx, ky);
    }
  }
  return k;
}

SimConfig SimConfig::make(const SimGrid& grid, double c_max, double cfl, double t_min,
                          int n_det) {
  if (c_max <= 0 || cfl <= 0 || t_min <= 0)
    throw std::invalid_argument("SimConfig: c_max, cfl, t_min must be positive");
  SimConfig c;
  c.cfl = cfl;
  c.c_max = c_max;
  c.dt = cfl * grid.h / c_max;
  c.record_stride = std::max(1, static_cast<int>(std::ceil(t_min / (grid.m * c.dt))));
  c.n_steps = grid.m * c.record_stride;
  c.n_det = n_det > 0 ? n_det : grid.m;
  c.t_final = c.n_steps * c.dt;
  c.validate(grid);
  return c;
}

void SimConfig::validate(const SimGrid& grid) const {
  if (dt == 0.0 || !std::isfinite(dt)) throw std::invalid_argument("SimConfig: bad dt");
  if (std::abs(dt) > cfl * grid.h / c_max + 1e-15)
    throw std::invalid_argument("SimConfig: dt violates the CFL bound cfl*h/c_max");
  if (n_steps <= 0 || record_stride <= 0 || n_steps % record_stride != 0)
    throw std::invalid_argument("SimConfig: n_steps must be a positive multiple of record_stride");
  if (n_det <= 0) throw std::invalid_argument("SimConfig: n_det must be positive");
}

// Per-call FFT state. Plans are bound to these buffers; FFTW_ESTIMATE keeps
// planning deterministic and cheap relative to a simulation.
struct Simulator::Workspace {
  int M;
  double* real;
  fftw_complex* spec;
  fftw_plan fwd;
  fftw_plan inv;

  explicit Workspace(int M_) : M(M_) {
    real = fftw_alloc_real(static_cast<std::size_t>(M) * M);
    spec = fftw_alloc_complex(static_cast<std::size_t>(M) * (M / 2 + 1));
    fwd = fftw_plan_dft_r2c_2d(M, M, real, spec, FFTW_ESTIMATE);
    inv = fftw_plan_dft_c2r_2d(M, M, spec, real, FFTW_ESTIMATE);
  }
  ~Workspace() {
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(inv);
    fftw_free(real);
    fftw_free(spec);
  }
  Workspace(const Workspace&) = delete;
  Workspace& operator=(const Workspace&) = delete;
};

Simulator::Simulator(SimGrid grid, SimConfig cfg) : grid_(grid), cfg_(cfg) {
  cfg_.validate(grid_);
  const int M = grid_.M;
  const double L = 2.0 * grid_.pad;

  // 4 sin^2(dt|k|/2), folded with the 1/M^2 FFT normalization; depends on dt
  // only through |dt|.
  const double adt = std::abs(cfg_.dt);
  symbol_.resize(static_cast<std::size_t>(M) * (M / 2 + 1));
  for (int i = 0; i < M; ++i) {
    const double ky = axis_wavenumber(i, M, L);
    for (int j = 0; j <= M / 2; ++j) {
      const double kx = axis_wavenumber(j, M, L);
      const double s = std::sin(0.5 * adt * std::hypot(kx, ky));
      symbol_[static_cast<std::size_t>(i) * (M / 2 + 1) + j] =
          4.0 * s * s / (static_cast<double>(M) * M);
    }
  }

  // Bilinear stencils for the unit-circle detectors; indices wrap because the
  // grid is periodic.
  detectors_.resize(cfg_.n_det);
  for (int d = 0; d < cfg_.n_det; ++d) {
    const double theta = 2.0 * std::numbers::pi * d / cfg_.n_det;
    const double x = std::cos(theta), y = std::sin(theta);
    const double u = (x + grid_.pad) / grid_.h;  // column coordinate
    const double v = (y + grid_.pad) / grid_.h;  // row coordinate
    const int j0 = static_cast<int>(std::floor(u));
    const int i0 = static_cast<int>(std::floor(v));
    const double fu = u - j0, fv = v - i0;
    DetectorStencil st;
    st.j0 = ((j0 % M) + M) % M;
    st.i0 = ((i0 % M) + M) % M;
    st.j1 = (st.j0 + 1) % M;
    st.i1 = (st.i0 + 1) % M;
    st.w00 = (1 - fv) * (1 - fu);
    st.w01 = (1 - fv) * fu;
    st.w10 = fv * (1 - fu);
    st.w11 = fv * fu;
    detectors_[d] = st;
  }
}

void Simulator::apply_spectral(Workspace& ws, const Field& in, Field& out) const {
  const int M = grid_.M;
  std::copy(in.v.begin(), in.v.end(), ws.real);
  fftw_execute(ws.fwd);
  const std::size_t n = static_cast<std::size_t>(M) * (M / 2 + 1);
  for (std::size_t i = 0; i < n; ++i) {
    ws.spec[i][0] *= symbol_[i];
    ws.spec[i][1] *= symbol_[i];
  }
  fftw_execute(ws.inv);
  out.rows = M;
  out.cols = M;
  out.v.assign(ws.real, ws.real + static_cast<std::size_t>(M) * M);
}

Field Simulator::step(const Field& p_prev, const Field& p_curr, const Field& speed_sq) const {
  require_shape(p_prev, grid_.M, grid_.M, "step p_prev");
  require_shape(p_curr, grid_.M, grid_.M, "step p_curr");
  require_shape(speed_sq, grid_.M, grid_.M, "step speed_sq");
  if (!p_prev.all_finite() || !p_curr.all_finite() || !speed_sq.all_finite())
    throw std::invalid_argument("step: non-finite input");
  Workspace ws(grid_.M);
  Field lap;
  apply_spectral(ws, p_curr, lap);
  Field next(grid_.M, grid_.M);
  for (std::size_t i = 0; i < next.v.size(); ++i)
    next.v[i] = 2.0 * p_curr.v[i] - p_prev.v[i] - speed_sq.v[i] * lap.v[i];
  return next;
}

Field Simulator::first_step(const Field& p0, const Field& speed_sq) const {
  require_shape(p0, grid_.M, grid_.M, "first_step p0");
  require_shape(speed_sq, grid_.M, grid_.M, "first_step speed_sq");
  if (!p0.all_finite() || !speed_sq.all_finite())
    throw std::invalid_argument("first_step: non-finite input");
  Workspace ws(grid_.M);
  Field lap;
  apply_spectral(ws, p0, lap);
  Field p1(grid_.M, grid_.M);
  for (std::size_t i = 0; i < p1.v.size(); ++i)
    p1.v[i] = p0.v[i] - 0.5 * speed_sq.v[i] * lap.v[i];
  return p1;
}

Field Simulator::embed_interior(const Field& f, double fill) const {
  require_shape(f, grid_.m, grid_.m, "embed_interior");
  Field full(grid_.M, grid_.M);
  std::fill(full.v.begin(), full.v.end(), fill);
  const int off = grid_.interior_offset();
  for (int i = 0; i < grid_.m; ++i)
    for (int j = 0; j < grid_.m; ++j) full.at(off + i, off + j) = f.at(i, j);
  return full;
}

Field Simulator::extract_interior(const Field& full) const {
  require_shape(full, grid_.M, grid_.M, "extract_interior");
  Field f(grid_.m, grid_.m);
  const int off = grid_.interior_offset();
  for (int i = 0; i < grid_.m; ++i)
    for (int j = 0; j < grid_.m; ++j) f.at(i, j) = full.at(off + i, off + j);
  return f;
}

void Simulator::sample_detectors(const Field& p, double* row_out) const {
  for (std::size_t d = 0; d < detectors_.size(); ++d) {
    const DetectorStencil& st = detectors_[d];
    row_out[d] = st.w00 * p.at(st.i0, st.j0) + st.w01 * p.at(st.i0, st.j1) +
                 st.w10 * p.at(st.i1, st.j0) + st.w11 * p.at(st.i1, st.j1);
  }
}

Field Simulator::simulate(const Field& f_interior, const Field& speed_sq,
                          Recording* recording) const {
  require_shape(f_interior, grid_.m, grid_.m, "simulate f");
  require_shape(speed_sq, grid_.M, grid_.M, "simulate speed_sq");
  if (!f_interior.all_finite() || !speed_sq.all_finite())
    throw std::invalid_argument("simulate: non-finite input");

  // True spectral stability limit: speed_sq * 4 sin^2(dt|k|/2) <= 4. The CFL
  // factory choice sits far inside; this guards mid-training excursions.
  double max_symbol = 0.0;
  for (double s : symbol_) max_symbol = std::max(max_symbol, s);
  max_symbol *= static_cast<double>(grid_.M) * grid_.M;  // undo normalization
  double max_c2 = 0.0;
  for (double c : speed_sq.v) max_c2 = std::max(max_c2, c);
  if (max_c2 * max_symbol > 4.0 + 1e-12)
    throw std::invalid_argument("simulate: speed field exceeds the stability limit for dt");

  Workspace ws(grid_.M);
  const int n_rec = cfg_.n_recorded();
  Field boundary(cfg_.n_det, n_rec);
  std::vector<double> det_row(cfg_.n_det);

  Field p_prev = embed_interior(f_interior, 0.0);
  if (recording) {
    recording->states.clear();
    recording->states.reserve(cfg_.n_steps + 1);
    recording->states.push_back(p_prev);
    recording->speed_sq = speed_sq;
  }

  Field lap;
  apply_spectral(ws, p_prev, lap);
  Field p_curr(grid_.M, grid_.M);
  for (std::size_t i = 0; i < p_curr.v.size(); ++i)
    p_curr.v[i] = p_prev.v[i] - 0.5 * speed_sq.v[i] * lap.v[i];
  if (recording) recording->states.push_back(p_curr);

  auto record_if_due = [&](int n, const Field& p) {
    if (n % cfg_.record_stride == 0) {
      const int r = n / cfg_.record_stride - 1;
      sample_detectors(p, det_row.data());
      for (int d = 0; d < cfg_.n_det; ++d) boundary.at(d, r) = det_row[d];
    }
  };
  record_if_due(1, p_curr);

  for (int n = 2; n <= cfg_.n_steps; ++n) {
    apply_spectral(ws, p_curr, lap);
    for (std::size_t i = 0; i < p_prev.v.size(); ++i) {
      const double next = 2.0 * p_curr.v[i] - p_prev.v[i] - speed_sq.v[i] * lap.v[i];
      p_prev.v[i] = next;  // p_prev becomes p_next
    }
    std::swap(p_prev, p_curr);
    if (recording) recording->states.push_back(p_curr);
    record_if_due(n, p_curr);
  }

  if (!boundary.all_finite())
    throw std::runtime_error("simulate: propagation produced non-finite samples");
  return boundary;
}

std::pair<Field, Field> Simulator::simulate_vjp(const Recording& recording,
                                                const Field& cotangent) const {
  const int N = cfg_.n_steps;
  if (static_cast<int>(recording.states.size()) != N + 1)
    throw std::invalid_argument("simulate_vjp: recording does not match the configuration");
  require_shape(cotangent, cfg_.n_det, cfg_.n_recorded(), "simulate_vjp cotangent");

  const Field& speed_sq = recording.speed_sq;
  Workspace ws(grid_.M);
  const std::size_t MM = static_cast<std::size_t>(grid_.M) * grid_.M;

  // Adjoint accumulators for every state; detector rows inject transposed
  // bilinear stencils at their recording step.
  std::vector<Field> q(N + 1);
  for (auto& f : q) f = Field(grid_.M, grid_.M);
  for (int r = 0; r < cfg_.n_recorded(); ++r) {
    const int n = (r + 1) * cfg_.record_stride;
    for (int d = 0; d < cfg_.n_det; ++d) {
      const DetectorStencil& st = detectors_[d];
      const double g = cotangent.at(d, r);
      q[n].at(st.i0, st.j0) += st.w00 * g;
      q[n].at(st.i0, st.j1) += st.w01 * g;
      q[n].at(st.i1, st.j0) += st.w10 * g;
      q[n].at(st.i1, st.j1) += st.w11 * g;
    }
  }

  Field grad_speed(grid_.M, grid_.M);
  Field tmp(grid_.M, grid_.M), lap(grid_.M, grid_.M);

  // p_n = 2 p_{n-1} - p_{n-2} - speed_sq .* Linv[p_{n-1}]
  for (int n = N; n >= 2; --n) {
    const Field& qn = q[n];
    for (std::size_t i = 0; i < MM; ++i) tmp.v[i] = speed_sq.v[i] * qn.v[i];
    apply_spectral(ws, tmp, lap);  // Linv is self-adjoint
    apply_spectral(ws, recording.states[n - 1], tmp);
    for (std::size_t i = 0; i < MM; ++i) {
      q[n - 1].v[i] += 2.0 * qn.v[i] - lap.v[i];
      q[n - 2].v[i] -= qn.v[i];
      grad_speed.v[i] -= qn.v[i] * tmp.v[i];
    }
    q[n].v.clear();
    q[n].v.shrink_to_fit();
  }

  // p_1 = p_0 - 0.5 * speed_sq .* Linv[p_0]
  {
    const Field& q1 = q[1];
    for (std::size_t i = 0; i < MM; ++i) tmp.v[i] = speed_sq.v[i] * q1.v[i];
    apply_spectral(ws, tmp, lap);
    apply_spectral(ws, recording.states[0], tmp);
    for (std::size_t i = 0; i < MM; ++i) {
      q[0].v[i] += q1.v[i] - 0.5 * lap.v[i];
      grad_speed.v[i] -= 0.5 * q1.v[i] * tmp.v[i];
    }
  }

  return {extract_interior(q[0]), std::move(grad_speed)};
}

Field Simulator::simulate_jvp(const Recording& recording, const Field& df_interior,
                              const Field& dspeed_sq) const {
  const int N = cfg_.n_steps;
  if (static_cast<int>(recording.states.size()) != N + 1)
    throw std::invalid_argument("simulate_jvp: recording does not match the configuration");
  require_shape(df_interior, grid_.m, grid_.m, "simulate_jvp df");
  require_shape(dspeed_sq, grid_.M, grid_.M, "simulate_jvp dspeed_sq");

  const Field& speed_sq = recording.speed_sq;
  Workspace ws(grid_.M);
  const std::size_t MM = static_cast<std::size_t>(grid_.M) * grid_.M;

  Field dboundary(cfg_.n_det, cfg_.n_recorded());
  std::vector<double> det_row(cfg_.n_det);
  auto record_if_due = [&](int n, const Field& dp) {
    if (n % cfg_.record_stride == 0) {
      const int r = n / cfg_.record_stride - 1;
      sample_detectors(dp, det_row.data());
      for (int d = 0; d < cfg_.n_det; ++d) dboundary.at(d, r) = det_row[d];
    }
  };

  Field dp_prev = embed_interior(df_interior, 0.0);
  Field lap_p(grid_.M, grid_.M), lap_dp(grid_.M, grid_.M);

  apply_spectral(ws, recording.states[0], lap_p);
  apply_spectral(ws, dp_prev, lap_dp);
  Field dp_curr(grid_.M, grid_.M);
  for (std::size_t i = 0; i < MM; ++i)
    dp_curr.v[i] = dp_prev.v[i] -
                   0.5 * (dspeed_sq.v[i] * lap_p.v[i] + speed_sq.v[i] * lap_dp.v[i]);
  record_if_due(1, dp_curr);

  for (int n = 2; n <= N; ++n) {
    apply_spectral(ws, recording.states[n - 1], lap_p);
    apply_spectral(ws, dp_curr, lap_dp);
    for (std::size_t i = 0; i < MM; ++i) {
      const double next = 2.0 * dp_curr.v[i] - dp_prev.v[i] -
                          dspeed_sq.v[i] * lap_p.v[i] - speed_sq.v[i] * lap_dp.v[i];
      dp_prev.v[i] = next;
    }
    std::swap(dp_prev, dp_curr);
    record_if_due(n, dp_curr);
  }
  return dboundary;
}

} // namespace patrec::kspace
