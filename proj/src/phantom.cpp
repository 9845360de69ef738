#include "patrec/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace patrec::phantom {

namespace {

// Modified head-phantom table (semi_x, semi_y, cx, cy, angle_deg, intensity);
// intensities chosen so the summed regions land on {0, 0.1, 0.2, 0.3, 1}.
constexpr std::array<std::array<double, 6>, 10> kBaseTable = {{
    {0.6900, 0.9200, 0.00, 0.0000, 0.0, 1.00},
    {0.6624, 0.8740, 0.00, -0.0184, 0.0, -0.80},
    {0.1100, 0.3100, 0.22, 0.0000, -18.0, -0.20},
    {0.1600, 0.4100, -0.22, 0.0000, 18.0, -0.20},
    {0.2100, 0.2500, 0.00, 0.3500, 0.0, 0.10},
    {0.0460, 0.0460, 0.00, 0.1000, 0.0, 0.10},
    {0.0460, 0.0460, 0.00, -0.1000, 0.0, 0.10},
    {0.0460, 0.0230, -0.08, -0.6050, 0.0, 0.10},
    {0.0230, 0.0230, 0.00, -0.6060, 0.0, 0.10},
    {0.0230, 0.0460, 0.06, -0.6050, 0.0, 0.10},
}};

constexpr int kMaxEllipseDraws = 200;
constexpr int kMaxPhantomDraws = 50;
constexpr double kContainTol = 1e-12;

// Squared normalized radius of the boundary point at parameter t, written as
// a degree-2 trigonometric polynomial g(t) = a0 + a1 cos t + b1 sin t
//                                          + a2 cos 2t + b2 sin 2t.
struct BoundaryRadius {
  double a0, a1, b1, a2, b2;

  explicit BoundaryRadius(const Ellipse& e) {
    const double c = std::cos(e.angle), s = std::sin(e.angle);
    const double ux = e.center_x / kSupportA, uy = e.center_y / kSupportB;
    // images of (semi_x, 0) and (0, semi_y) in normalized coordinates
    const double vx = c * e.semi_x / kSupportA, vy = s * e.semi_x / kSupportB;
    const double wx = -s * e.semi_y / kSupportA, wy = c * e.semi_y / kSupportB;
    const double uu = ux * ux + uy * uy;
    const double vv = vx * vx + vy * vy;
    const double ww = wx * wx + wy * wy;
    a0 = uu + 0.5 * (vv + ww);
    a1 = 2.0 * (ux * vx + uy * vy);
    b1 = 2.0 * (ux * wx + uy * wy);
    a2 = 0.5 * (vv - ww);
    b2 = vx * wx + vy * wy;
  }

  double value(double t) const {
    return a0 + a1 * std::cos(t) + b1 * std::sin(t) + a2 * std::cos(2 * t) +
           b2 * std::sin(2 * t);
  }
  double deriv(double t) const {
    return -a1 * std::sin(t) + b1 * std::cos(t) - 2 * a2 * std::sin(2 * t) +
           2 * b2 * std::cos(2 * t);
  }
  double deriv2(double t) const {
    return -a1 * std::cos(t) - b1 * std::sin(t) - 4 * a2 * std::cos(2 * t) -
           4 * b2 * std::sin(2 * t);
  }

  double max() const {
    constexpr int kScan = 2048;
    double best_t = 0.0, best = value(0.0);
    for (int i = 1; i < kScan; ++i) {
      const double t = 2.0 * std::numbers::pi * i / kScan;
      const double g = value(t);
      if (g > best) {
        best = g;
        best_t = t;
      }
    }
    double t = best_t;
    for (int it = 0; it < 8; ++it) {
      const double d2 = deriv2(t);
      if (d2 >= -1e-30) break;
      t -= deriv(t) / d2;
    }
    return std::max(best, value(t));
  }
};

bool valid_geometry(const Ellipse& e) {
  return e.semi_x > 0.0 && e.semi_y > 0.0 && std::abs(e.center_x) <= 1.0 &&
         std::abs(e.center_y) <= 1.0;
}

void check_ellipses(std::span<const Ellipse> ellipses) {
  for (const Ellipse& e : ellipses) {
    if (!valid_geometry(e))
      throw std::invalid_argument("rasterize: degenerate ellipse");
    if (!contained_in_support(e))
      throw std::invalid_argument("rasterize: ellipse escapes the support ellipse");
  }
}

} // namespace

bool contains_point(const Ellipse& e, double x, double y) {
  const double dx = x - e.center_x, dy = y - e.center_y;
  const double c = std::cos(e.angle), s = std::sin(e.angle);
  const double xr = (c * dx + s * dy) / e.semi_x;
  const double yr = (-s * dx + c * dy) / e.semi_y;
  return xr * xr + yr * yr <= 1.0;
}

bool contained_in_support(const Ellipse& e) {
  if (!valid_geometry(e)) return false;
  return BoundaryRadius(e).max() <= 1.0 + kContainTol;
}

std::vector<Ellipse> shepp_logan() {
  std::vector<Ellipse> out;
  out.reserve(kBaseTable.size());
  for (const auto& row : kBaseTable) {
    out.push_back(Ellipse{row[0], row[1], row[2], row[3],
                          row[4] * std::numbers::pi / 180.0, row[5]});
  }
  return out;
}

Field rasterize_raw(std::span<const Ellipse> ellipses, int m) {
  Field f(m, m);
  for (const Ellipse& e : ellipses) {
    // bounding box in grid indices; node j sits at -1 + 2j/m
    const double r = std::max(e.semi_x, e.semi_y);
    const int j0 = std::max(0, static_cast<int>(std::floor((e.center_x - r + 1.0) * m / 2.0)));
    const int j1 = std::min(m - 1, static_cast<int>(std::ceil((e.center_x + r + 1.0) * m / 2.0)));
    const int i0 = std::max(0, static_cast<int>(std::floor((e.center_y - r + 1.0) * m / 2.0)));
    const int i1 = std::min(m - 1, static_cast<int>(std::ceil((e.center_y + r + 1.0) * m / 2.0)));
    for (int i = i0; i <= i1; ++i) {
      const double y = -1.0 + 2.0 * i / m;
      for (int j = j0; j <= j1; ++j) {
        const double x = -1.0 + 2.0 * j / m;
        if (contains_point(e, x, y)) f.at(i, j) += e.intensity;
      }
    }
  }
  return f;
}

Field rasterize(std::span<const Ellipse> ellipses, int m) {
  if (m < 8) throw std::invalid_argument("rasterize: grid size must be >= 8");
  check_ellipses(ellipses);
  Field f = rasterize_raw(ellipses, m);
  for (double& x : f.v) x = std::clamp(x, 0.0, 1.0);
  return f;
}

std::vector<Ellipse> sample_phantom(Rng& rng, double jitter) {
  if (jitter < 0.0) throw std::invalid_argument("sample_phantom: jitter must be >= 0");
  std::vector<Ellipse> out;
  out.reserve(kBaseTable.size());
  for (const auto& row : kBaseTable) {
    bool accepted = false;
    for (int attempt = 0; attempt < kMaxEllipseDraws && !accepted; ++attempt) {
      Ellipse e;
      double scale[6];
      for (double& s : scale) s = 1.0 + rng.uniform(-jitter, jitter);
      e.semi_x = row[0] * scale[0];
      e.semi_y = row[1] * scale[1];
      e.center_x = row[2] * scale[2];
      e.center_y = row[3] * scale[3];
      e.angle = row[4] * std::numbers::pi / 180.0 * scale[4];
      e.intensity = row[5] * scale[5];
      if (valid_geometry(e) && contained_in_support(e)) {
        out.push_back(e);
        accepted = true;
      }
    }
    if (!accepted)
      throw std::runtime_error(
          "sample_phantom: rejection sampling exhausted (degenerate jitter)");
  }
  return out;
}

Dataset build_dataset(std::uint64_t seed, int m, int n_train, int n_val, int n_test,
                      double jitter) {
  if (n_train <= 0 || n_val <= 0 || n_test <= 0)
    throw std::invalid_argument("build_dataset: counts must be positive");
  Dataset ds;
  ds.seed = seed;
  ds.jitter = jitter;
  ds.m = m;

  auto make_one = [&](std::uint64_t index) {
    Rng rng(seed, index);
    for (int attempt = 0; attempt < kMaxPhantomDraws; ++attempt) {
      Field f = rasterize(sample_phantom(rng, jitter), m);
      if (f.max_abs() > 0.0) return f;
    }
    throw std::runtime_error("build_dataset: could not draw a nonzero phantom");
  };

  const int total = n_train + n_val + n_test;
  for (int i = 0; i < total; ++i) {
    Field f = make_one(static_cast<std::uint64_t>(i));
    if (i < n_train)
      ds.train.push_back(std::move(f));
    else if (i < n_train + n_val)
      ds.validation.push_back(std::move(f));
    else
      ds.test.push_back(std::move(f));
  }
  return ds;
}

} // namespace patrec::phantom
