#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "patrec/kspace.hpp"
#include "patrec/rng.hpp"

using namespace patrec;
using namespace patrec::kspace;

namespace {

Field constant_field(int n, double v) {
  Field f(n, n);
  std::fill(f.v.begin(), f.v.end(), v);
  return f;
}

Field cosine_mode(const SimGrid& g, int jx, int jy, double phase = 0.0) {
  Field f(g.M, g.M);
  const double L = 2.0 * g.pad;
  const double kx = 2.0 * std::numbers::pi * jx / L;
  const double ky = 2.0 * std::numbers::pi * jy / L;
  for (int i = 0; i < g.M; ++i) {
    const double y = -g.pad + i * g.h;
    for (int j = 0; j < g.M; ++j) {
      const double x = -g.pad + j * g.h;
      f.at(i, j) = std::cos(kx * x + ky * y + phase);
    }
  }
  return f;
}

double mode_magnitude(const SimGrid& g, int jx, int jy) {
  const double L = 2.0 * g.pad;
  return std::hypot(2.0 * std::numbers::pi * jx / L, 2.0 * std::numbers::pi * jy / L);
}

// O(M^4) direct-DFT evaluation of one update
//   p_next = 2 p - p_prev - speed_sq .* F^-1[ 4 sin^2(dt|k|/2) F p ].
// Completely independent of the FFT path.
Field brute_force_step(const Field& p_prev, const Field& p_curr, const Field& speed_sq,
                       const SimGrid& g, double dt) {
  const int M = g.M;
  const double L = 2.0 * g.pad;
  using cplx = std::complex<double>;
  std::vector<cplx> spec(static_cast<std::size_t>(M) * M);
  for (int a = 0; a < M; ++a)
    for (int b = 0; b < M; ++b) {
      cplx acc(0, 0);
      for (int i = 0; i < M; ++i)
        for (int j = 0; j < M; ++j) {
          const double ang = -2.0 * std::numbers::pi * (double(a) * i + double(b) * j) / M;
          acc += p_curr.at(i, j) * cplx(std::cos(ang), std::sin(ang));
        }
      const int as = a < M / 2 ? a : a - M;
      const int bs = b < M / 2 ? b : b - M;
      const double kmag = std::hypot(2.0 * std::numbers::pi * as / L,
                                     2.0 * std::numbers::pi * bs / L);
      const double s = std::sin(0.5 * dt * kmag);
      spec[static_cast<std::size_t>(a) * M + b] = acc * (4.0 * s * s);
    }
  Field next(M, M);
  for (int i = 0; i < M; ++i)
    for (int j = 0; j < M; ++j) {
      cplx acc(0, 0);
      for (int a = 0; a < M; ++a)
        for (int b = 0; b < M; ++b) {
          const double ang = 2.0 * std::numbers::pi * (double(a) * i + double(b) * j) / M;
          acc += spec[static_cast<std::size_t>(a) * M + b] * cplx(std::cos(ang), std::sin(ang));
        }
      const double lap = acc.real() / (static_cast<double>(M) * M);
      next.at(i, j) = 2.0 * p_curr.at(i, j) - p_prev.at(i, j) - speed_sq.at(i, j) * lap;
    }
  return next;
}

double dot(const Field& a, const Field& b) {
  double acc = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) acc += a.v[i] * b.v[i];
  return acc;
}

Field random_field(int rows, int cols, Rng& rng, double scale = 1.0) {
  Field f(rows, cols);
  for (double& v : f.v) v = scale * rng.uniform(-1.0, 1.0);
  return f;
}

} // namespace

TEST_CASE("wavenumber magnitudes") {
  auto g4 = SimGrid::make(4, 1);
  Field k = wavenumber_magnitudes(g4);
  CHECK(k.at(0, 0) == 0.0);
  // axis values for M=4, L=2: {0, pi, -2pi, -pi}
  const double pi = std::numbers::pi;
  CHECK(k.at(0, 1) == doctest::Approx(pi));
  CHECK(k.at(0, 2) == doctest::Approx(2 * pi));
  CHECK(k.at(0, 3) == doctest::Approx(pi));
  // symmetric under negating both indices
  auto g = SimGrid::make(8, 2);
  Field km = wavenumber_magnitudes(g);
  for (int i = 1; i < g.M; ++i)
    for (int j = 1; j < g.M; ++j)
      CHECK(km.at(i, j) == doctest::Approx(km.at(g.M - i, g.M - j)));
}

TEST_CASE("config factory and CFL validation") {
  auto g = SimGrid::make(32, 2);
  auto cfg = SimConfig::make(g, 1.0);
  CHECK(cfg.dt == doctest::Approx(0.3 * g.h));
  CHECK(cfg.n_steps == 32 * cfg.record_stride);
  CHECK(cfg.t_final >= 2.5);
  CHECK(cfg.n_det == 32);

  SimConfig bad = cfg;
  bad.dt *= 2.0;  // violates cfl * h / c_max
  CHECK_THROWS_AS(bad.validate(g), std::invalid_argument);
}

TEST_CASE("zero fields stay zero through the update") {
  auto g = SimGrid::make(8, 2);
  auto cfg = SimConfig::make(g, 1.0);
  Simulator sim(g, cfg);
  Field z(g.M, g.M);
  Field next = sim.step(z, z, constant_field(g.M, 1.0));
  CHECK(next.max_abs() == 0.0);
  CHECK(sim.first_step(z, constant_field(g.M, 1.0)).max_abs() == 0.0);
}

TEST_CASE("first step of a cosine mode contracts by cos(dt|k|)") {
  auto g = SimGrid::make(16, 1);
  auto cfg = SimConfig::make(g, 1.0);
  Simulator sim(g, cfg);
  Field f = cosine_mode(g, 2, 3);
  Field p1 = sim.first_step(f, constant_field(g.M, 1.0));
  const double factor = std::cos(cfg.dt * mode_magnitude(g, 2, 3));
  for (std::size_t i = 0; i < f.v.size(); ++i)
    CHECK(std::abs(p1.v[i] - factor * f.v[i]) <= 1e-12);
}

TEST_CASE("the update depends on dt only through sin^2 (even in dt)") {
  auto g = SimGrid::make(8, 1);
  auto cfg = SimConfig::make(g, 1.0);
  Simulator pos(g, cfg);
  SimConfig neg_cfg = cfg;
  neg_cfg.dt = -cfg.dt;
  Simulator neg(g, neg_cfg);
  Rng rng(3, 0);
  Field f = random_field(g.M, g.M, rng);
  Field c2 = constant_field(g.M, 0.9);
  Field a = pos.first_step(f, c2);
  Field b = neg.first_step(f, c2);
  CHECK(a.v == b.v);  // bitwise
}

TEST_CASE("unit-speed single modes follow the exact cosine evolution") {
  auto g = SimGrid::make(64, 1);
  SimConfig cfg = SimConfig::make(g, 1.0);
  Simulator sim(g, cfg);
  Field ones = constant_field(g.M, 1.0);
  Rng rng(17, 0);
  for (int trial = 0; trial < 3; ++trial) {
    const int jx = 1 + static_cast<int>(rng.below(30));
    const int jy = 1 + static_cast<int>(rng.below(30));
    Field p_prev = cosine_mode(g, jx, jy);
    Field p0 = p_prev;
    Field p_curr = sim.first_step(p_prev, ones);
    const double kmag = mode_magnitude(g, jx, jy);
    double max_err = 0;
    for (int n = 2; n <= 100; ++n) {
      Field next = sim.step(p_prev, p_curr, ones);
      p_prev = std::move(p_curr);
      p_curr = std::move(next);
      const double amp = std::cos(n * cfg.dt * kmag);
      for (std::size_t i = 0; i < p_curr.v.size(); ++i)
        max_err = std::max(max_err, std::abs(p_curr.v[i] - amp * p0.v[i]));
    }
    CHECK(max_err <= 1e-10);
  }
}

TEST_CASE("constant speed 0.7 converges at second order in dt") {
  auto g = SimGrid::make(32, 1);
  Field c2 = constant_field(g.M, 0.7);
  Field p0 = cosine_mode(g, 1, 2);
  const double kmag = mode_magnitude(g, 1, 2);
  const double T = 1.0;

  auto error_at = [&](int n_steps) {
    const double dt = T / n_steps;
    SimConfig cfg;
    cfg.dt = dt;
    cfg.n_steps = n_steps;
    cfg.record_stride = n_steps;
    cfg.n_det = 4;
    cfg.c_max = std::sqrt(0.7);
    cfg.cfl = 1.0;  // manual config; dt is well below any stability limit
    Simulator sim(g, cfg);
    Field p_prev = p0;
    Field p_curr = sim.first_step(p_prev, c2);
    for (int n = 2; n <= n_steps; ++n) {
      Field next = sim.step(p_prev, p_curr, c2);
      p_prev = std::move(p_curr);
      p_curr = std::move(next);
    }
    const double amp = std::cos(std::sqrt(0.7) * kmag * T);
    double err = 0;
    for (std::size_t i = 0; i < p_curr.v.size(); ++i)
      err = std::max(err, std::abs(p_curr.v[i] - amp * p0.v[i]));
    return err;
  };

  const double e1 = error_at(128);
  const double e2 = error_at(256);
  const double ratio = e1 / e2;
  CHECK(ratio >= 3.5);
  CHECK(ratio <= 4.5);
}

TEST_CASE("one heterogeneous step matches the direct-DFT oracle") {
  auto g = SimGrid::make(8, 1);  // M = 8
  SimConfig cfg = SimConfig::make(g, 1.2);
  Simulator sim(g, cfg);
  Rng rng(9, 1);
  Field p_prev = random_field(g.M, g.M, rng);
  Field p_curr = random_field(g.M, g.M, rng);
  Field c2(g.M, g.M);
  for (double& v : c2.v) v = 0.5 + rng.uniform();  // heterogeneous in [0.5, 1.5)
  Field fast = sim.step(p_prev, p_curr, c2);
  Field slow = brute_force_step(p_prev, p_curr, c2, g, cfg.dt);
  double max_err = 0;
  for (std::size_t i = 0; i < fast.v.size(); ++i)
    max_err = std::max(max_err, std::abs(fast.v[i] - slow.v[i]));
  CHECK(max_err <= 1e-10);
}

TEST_CASE("simulate: zero phantom, linearity, determinism") {
  auto g = SimGrid::make(16, 2);
  auto cfg = SimConfig::make(g, 1.0);
  Simulator sim(g, cfg);
  Field c2 = constant_field(g.M, 0.85);

  Field zero(g.m, g.m);
  CHECK(sim.simulate(zero, c2).max_abs() == 0.0);

  Rng rng(21, 0);
  Field f = random_field(g.m, g.m, rng, 0.5);
  Field y1 = sim.simulate(f, c2);
  Field f2 = f;
  for (double& v : f2.v) v *= 2.0;
  Field y2 = sim.simulate(f2, c2);
  for (std::size_t i = 0; i < y1.v.size(); ++i)
    CHECK(std::abs(y2.v[i] - 2.0 * y1.v[i]) <= 1e-12);

  Field y1b = sim.simulate(f, c2);
  CHECK(y1.v == y1b.v);  // bitwise
}

TEST_CASE("rotationally symmetric phantom gives near-equal detector rows") {
  // The record stops at T = 1.8, before the first periodic ghost (a non-radial
  // artifact of the FFT grid) can reach the detector circle at t ~ 2.1.
  const int m = 128;
  auto g = SimGrid::make(m, 2);
  SimConfig cfg;
  cfg.dt = 0.3 * g.h;
  cfg.record_stride = 3;
  cfg.n_steps = m * cfg.record_stride;
  cfg.n_det = m;
  cfg.c_max = 1.0;
  cfg.t_final = cfg.n_steps * cfg.dt;
  Simulator sim(g, cfg);
  // smooth radial profile
  Field f(m, m);
  for (int i = 0; i < m; ++i) {
    const double y = -1.0 + 2.0 * i / m;
    for (int j = 0; j < m; ++j) {
      const double x = -1.0 + 2.0 * j / m;
      f.at(i, j) = std::exp(-(x * x + y * y) / (0.35 * 0.35));
    }
  }
  Field y = sim.simulate(f, constant_field(g.M, 1.0));
  double peak = y.max_abs();
  REQUIRE(peak > 0.0);
  double max_dev = 0;
  for (int d = 1; d < cfg.n_det; ++d)
    for (int t = 0; t < cfg.n_recorded(); ++t)
      max_dev = std::max(max_dev, std::abs(y.at(d, t) - y.at(0, t)));
  CHECK(max_dev / peak <= 1e-3);
}

TEST_CASE("vjp: zero cotangent and finite differences") {
  auto g = SimGrid::make(16, 2);
  SimConfig cfg;
  cfg.dt = 0.3 * g.h;
  cfg.record_stride = 1;
  cfg.n_steps = 16;
  cfg.n_det = 16;
  cfg.c_max = 1.0;
  Simulator sim(g, cfg);

  Rng rng(33, 0);
  Field f = random_field(g.m, g.m, rng, 0.5);
  Field c2(g.M, g.M);
  for (double& v : c2.v) v = 0.8 + 0.2 * rng.uniform();

  Simulator::Recording rec;
  Field y = sim.simulate(f, c2, &rec);

  Field zero_cot(cfg.n_det, cfg.n_recorded());
  auto [gf0, gc0] = sim.simulate_vjp(rec, zero_cot);
  CHECK(gf0.max_abs() == 0.0);
  CHECK(gc0.max_abs() == 0.0);

  Field cot = random_field(cfg.n_det, cfg.n_recorded(), rng);
  auto [gf, gc] = sim.simulate_vjp(rec, cot);

  auto objective = [&](const Field& fi, const Field& ci) {
    Field yy = sim.simulate(fi, ci);
    return dot(yy, cot);
  };
  const double h = 1e-4;
  for (int k = 0; k < 20; ++k) {
    // alternate between f and speed coordinates
    if (k % 2 == 0) {
      const int idx = static_cast<int>(rng.below(f.v.size()));
      Field fp = f, fm = f;
      fp.v[idx] += h;
      fm.v[idx] -= h;
      const double fd = (objective(fp, c2) - objective(fm, c2)) / (2 * h);
      const double rel = std::abs(fd - gf.v[idx]) /
                         std::max({std::abs(fd), std::abs(gf.v[idx]), 1e-8});
      CHECK(rel <= 1e-4);
    } else {
      const int idx = static_cast<int>(rng.below(c2.v.size()));
      Field cp = c2, cm = c2;
      cp.v[idx] += h;
      cm.v[idx] -= h;
      const double fd = (objective(f, cp) - objective(f, cm)) / (2 * h);
      const double rel = std::abs(fd - gc.v[idx]) /
                         std::max({std::abs(fd), std::abs(gc.v[idx]), 1e-8});
      CHECK(rel <= 1e-4);
    }
  }
}

TEST_CASE("adjoint dot test to 1e-10") {
  auto g = SimGrid::make(16, 2);
  auto cfg = SimConfig::make(g, 1.0);
  Simulator sim(g, cfg);
  Rng rng(55, 0);
  Field f = random_field(g.m, g.m, rng, 0.5);
  Field c2(g.M, g.M);
  for (double& v : c2.v) v = 0.75 + 0.2 * rng.uniform();

  Simulator::Recording rec;
  sim.simulate(f, c2, &rec);

  Field uf = random_field(g.m, g.m, rng);
  Field uc = random_field(g.M, g.M, rng);
  Field v = random_field(cfg.n_det, cfg.n_recorded(), rng);

  Field ju = sim.simulate_jvp(rec, uf, uc);
  auto [gf, gc] = sim.simulate_vjp(rec, v);
  const double lhs = dot(ju, v);
  const double rhs = dot(uf, gf) + dot(uc, gc);
  CHECK(std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs)) <= 1e-10);
}

TEST_CASE("no speed sensitivity where the field never arrived") {
  auto g = SimGrid::make(16, 2);
  SimConfig cfg;
  cfg.dt = 0.3 * g.h;
  cfg.record_stride = 1;
  cfg.n_steps = 16;  // wave travels at most ~0.3 length units
  cfg.n_det = 16;
  cfg.c_max = 1.0;
  Simulator sim(g, cfg);

  Rng rng(71, 0);
  Field f = random_field(g.m, g.m, rng, 0.5);
  Field c2 = constant_field(g.M, 0.9);
  Simulator::Recording rec;
  sim.simulate(f, c2, &rec);
  auto [gf, gc] = sim.simulate_vjp(rec, random_field(cfg.n_det, cfg.n_recorded(), rng));

  // the quiet region: grid nodes where p stayed numerically zero throughout
  double quiet_grad_sum = 0;
  for (int i = 0; i < g.M; ++i)
    for (int j = 0; j < g.M; ++j) {
      double pmax = 0;
      for (const auto& st : rec.states) pmax = std::max(pmax, std::abs(st.at(i, j)));
      if (pmax < 1e-13) quiet_grad_sum += std::abs(gc.at(i, j));
    }
  CHECK(quiet_grad_sum <= 1e-8);
}

TEST_CASE("simulate rejects unstable speed fields and non-finite input") {
  auto g = SimGrid::make(8, 2);
  auto cfg = SimConfig::make(g, 1.0);
  Simulator sim(g, cfg);
  Field f(g.m, g.m);
  f.at(0, 0) = 1.0;
  CHECK_THROWS_AS(sim.simulate(f, constant_field(g.M, 1e5)), std::invalid_argument);
  Field bad = f;
  bad.at(1, 1) = std::nan("");
  CHECK_THROWS_AS(sim.simulate(bad, constant_field(g.M, 1.0)), std::invalid_argument);
}
